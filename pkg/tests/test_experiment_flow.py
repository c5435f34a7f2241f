"""
实验流程测试
"""
import importlib.util
import os
import sys
import tempfile
import unittest

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.experiment_system import ExperimentSystem
from src.utils.config_loader import ExperimentConfig
from src.utils.errors import ConfigError

HAS_CREWAI = bool(importlib.util.find_spec("crewai"))


def flow_config(run_dir):
    train = {'learning_rate': 0.5, 'batch_size': 8, 'max_epochs': 2, 'patience': 1}
    return ExperimentConfig(**{
        'experiment': {'name': 'flow', 'run_dir': run_dir, 'max_workers': 2},
        'data': {
            'target': {'synthetic': {'n_pos': 25, 'n_neg': 150, 'seed': 3}},
            'source': [{'synthetic': {'n_pos': 50, 'n_neg': 20, 'topic_weights': 'askapatient',
                                      'lang': 'en', 'seed': 4, 'source': 'askapatient'}}],
        },
        'ensemble': {'model_seeds': [1, 2], 'sampling_seeds': [1, 2]},
        'backends': {'stub': {'stage1': train, 'stage2': dict(train, batch_size=4)}},
        'scenarios': [
            {'name': 'zero_shot', 'kind': 'zero_shot', 'backend': 'stub'},
            {'name': 'per_class_10', 'kind': 'few_shot', 'backend': 'stub',
             'fewshot': {'mode': 'per_class', 'shots': 10}},
        ],
        'report': {'postprocess': False, 'error_analysis': False},
    })


@unittest.skipUnless(HAS_CREWAI, "需要安装 crewai")
class TestExperimentFlow(unittest.TestCase):
    """实验流程测试"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.system = ExperimentSystem(flow_config(os.path.join(self.tmp.name, 'run')))

    def test_flow_runs_all_stages(self):
        """测试流程依次完成准备、第一阶段、场景与报告"""
        from src.flows.experiment_flow import run_experiment_flow

        state = run_experiment_flow(self.system)
        self.assertEqual(state.current_stage, "completed")
        self.assertEqual(state.completed, ['zero_shot', 'per_class_10'])
        self.assertEqual(state.stage1_backends, ['stub'])
        self.assertIn('F1_m', state.summary['per_class_10'])
        self.assertTrue(os.path.exists(os.path.join(self.tmp.name, 'run', 'reports', 'aggregate.csv')))

    def test_unknown_scenario(self):
        """测试未知场景名在准备阶段报错"""
        from src.flows.experiment_flow import run_experiment_flow

        with self.assertRaises(ConfigError):
            run_experiment_flow(self.system, ['missing'])


if __name__ == '__main__':
    unittest.main()
