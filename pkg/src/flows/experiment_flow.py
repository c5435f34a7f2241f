"""
实验流程控制
使用 Flows 把实验流水线拆成 准备 -> 第一阶段 -> 场景网格 -> 报告 四个步骤
"""
import logging
from datetime import datetime
from typing import Dict, List, Optional, Sequence

from crewai.flow.flow import Flow, listen, start
from pydantic import BaseModel

from src.experiment_system import ExperimentSystem
from src.utils.config_loader import TWO_STAGE_BACKENDS
from src.utils.errors import GridError

logger = logging.getLogger(__name__)


class ExperimentState(BaseModel):
    """实验流程状态"""
    scenario_names: List[str] = []
    current_stage: str = "initialized"
    start_time: Optional[str] = None
    end_time: Optional[str] = None
    stage1_backends: List[str] = []
    completed: List[str] = []
    failed: List[str] = []
    summary: Dict[str, Dict[str, float]] = {}
    outputs: List[str] = []
    error: Optional[str] = None


class ExperimentFlow(Flow[ExperimentState]):
    """实验流程，任一步骤抛出异常后后续步骤不再执行，异常由 run_experiment_flow 重新抛出"""

    def __init__(self, system: ExperimentSystem, scenario_names: Optional[Sequence[str]] = None):
        super().__init__()
        self.system = system
        self.requested = list(scenario_names or [])
        self.failure: Optional[Exception] = None

    def _fail(self, stage: str, error: Exception):
        logger.error(f"流程在 {stage} 阶段失败: {error}")
        self.state.error = f"{stage}: {error}"
        self.failure = error

    @start()
    def prepare_data(self):
        """读取、划分并预处理语料"""
        logger.info("=== 准备数据 ===")
        self.state.current_stage = "prepare"
        self.state.start_time = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
        try:
            scenarios = ([self.system.scenario(n) for n in self.requested] if self.requested
                         else list(self.system.config.scenarios))
            self.state.scenario_names = [s.name for s in scenarios]
            self.system.prepare()
        except Exception as e:
            self._fail("prepare", e)
        return {"scenarios": self.state.scenario_names}

    @listen("prepare_data")
    def train_source_models(self, prepared):
        """为需要第一阶段模型的后端训练或加载源语言模型"""
        if self.failure is not None:
            return {"success": False}
        logger.info("=== 第一阶段训练 ===")
        self.state.current_stage = "train_source"
        seeds_by_backend: Dict[str, List[int]] = {}
        for name in prepared.get("scenarios", []):
            scenario = self.system.scenario(name)
            if scenario.backend not in TWO_STAGE_BACKENDS:
                continue
            seeds = seeds_by_backend.setdefault(scenario.backend, [])
            for seed in self.system.config.ensemble_spec(scenario).model_seeds:
                if seed not in seeds:
                    seeds.append(seed)
        try:
            for backend_name, seeds in seeds_by_backend.items():
                self.system.train_source(backend_name, seeds)
                self.state.stage1_backends.append(backend_name)
        except Exception as e:
            self._fail("train_source", e)
            return {"success": False}
        return {"success": True}

    @listen("train_source_models")
    def run_scenarios(self, stage1_result):
        """逐个执行场景网格，单个场景失败不影响其他场景"""
        if self.failure is not None or not stage1_result.get("success", False):
            return {"success": False}
        logger.info("=== 执行场景 ===")
        self.state.current_stage = "scenarios"
        for name in self.state.scenario_names:
            try:
                result = self.system.run_scenario(self.system.scenario(name))
                self.state.completed.append(name)
                mean = result.aggregate.mean_report
                self.state.summary[name] = {'F1_1': mean.f1_1, 'F1_m': mean.f1_macro, 'AUC': mean.auc}
            except GridError as e:
                logger.error(f"场景 {name} 失败: {e}")
                self.system.manifest.record('run', self.system.config_hash, status='failed', scenario=name,
                                            error=str(e))
                self.state.failed.append(name)
            except Exception as e:
                self._fail(f"scenario {name}", e)
                return {"success": False}
        return {"success": bool(self.state.completed)}

    @listen("run_scenarios")
    def write_reports(self, scenario_result):
        """写出汇总报告"""
        if self.failure is not None or not scenario_result.get("success", False):
            return {"success": False}
        logger.info("=== 生成报告 ===")
        self.state.current_stage = "report"
        try:
            self.state.outputs = self.system.write_reports()
        except Exception as e:
            self._fail("report", e)
            return {"success": False}
        self.state.current_stage = "completed"
        self.state.end_time = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
        logger.info(f"流程完成: 成功 {len(self.state.completed)} 个场景，失败 {len(self.state.failed)} 个")
        return {"success": True, "outputs": self.state.outputs}


def run_experiment_flow(system: ExperimentSystem, scenario_names: Optional[Sequence[str]] = None) -> ExperimentState:
    """
    运行实验流程

    Raises:
        流程中出现的第一个异常；有场景失败时抛出 GridError
    """
    flow = ExperimentFlow(system, scenario_names)
    flow.kickoff()
    if flow.failure is not None:
        raise flow.failure
    if flow.state.failed:
        raise GridError(f"{len(flow.state.failed)} 个场景失败: {flow.state.failed}")
    return flow.state
