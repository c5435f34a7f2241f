"""
实验网格执行器测试
"""
import os
import sys
import tempfile
import unittest

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.backends.base import FreezePolicy, Prediction, TrainConfig
from src.backends.stub_backend import StubBackend
from src.tasks.ensemble_voting import EnsembleSpec
from src.tools.corpus_tools import Corpus, Document
from src.tools.lexicon_tools import Lexicon, RuleName
from src.tools.preprocess_tools import NormalizerConfig, normalize_corpus, to_processed
from src.tools.sampling_tools import FewShotSpec, build_fewshot_sets, enumerate_seed_pools
from src.utils.errors import CapacityError, GridError
from src.utils.grid_runner import GridRunner, run_grid, vote_and_score
from src.utils.run_manifest import RunLayout


def make_corpus(name, n_pos, n_neg):
    docs = []
    for i in range(n_pos):
        docs.append(Document(id=f"{name}-p{i}", text="seit ich zolvatin nehme habe ich kopfschmerzen",
                             label=1, topic="t", lang="de"))
    for i in range(n_neg):
        docs.append(Document(id=f"{name}-n{i}", text="heute war das wetter schön im garten",
                             label=0, topic="t", lang="de"))
    return Corpus(name=name, documents=tuple(docs))


class TestGridRunner(unittest.TestCase):
    """网格执行测试"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.layout = RunLayout(self.tmp.name).ensure()
        self.backend = StubBackend()
        self.pool = make_corpus("pool", 20, 60)
        self.test = make_corpus("test", 5, 15)
        self.test_docs = to_processed(self.test)
        self.config = TrainConfig(learning_rate=0.5, batch_size=4, freeze_policy=FreezePolicy.NONE, max_epochs=3)
        self.spec = EnsembleSpec(model_seeds=[1, 2, 3], sampling_seeds=[1, 2, 3])
        self.fewshot = FewShotSpec(mode="per_class", shots=10)

    def _build(self, pool, seed):
        return build_fewshot_sets(pool, None, self.fewshot.with_seed(seed), held_out_ids=self.test.ids)

    def _run(self, runner, build_sets=None, scenario="per_class_10"):
        pools = enumerate_seed_pools(self.pool, self.spec.sampling_seeds)
        return runner.run_grid(scenario, self.spec, pools, build_sets or self._build, {}, self.config,
                               self.test, self.test_docs)

    def test_run_and_resume(self):
        """测试完整网格与重跑时跳过已完成任务"""
        result = self._run(GridRunner(self.backend, self.layout, max_workers=2))
        self.assertEqual(len(result.outcomes), 3)
        self.assertTrue(all(o.success and o.n_fits == 3 for o in result.outcomes))
        self.assertEqual(len(result.aggregate.per_seed_reports), 3)
        self.assertIsNotNone(result.aggregate.std_report)
        for seed in self.spec.sampling_seeds:
            seed_dir = self.layout.seed_dir("per_class_10", seed)
            self.assertTrue(os.path.exists(os.path.join(seed_dir, 'votes.csv')))
            self.assertTrue(os.path.exists(os.path.join(seed_dir, 'manifest.jsonl')))
            self.assertTrue(os.path.exists(os.path.join(seed_dir, 'model_2', 'DONE')))

        rerun = self._run(GridRunner(self.backend, self.layout))
        self.assertTrue(all(o.n_fits == 0 and o.n_skipped == 3 for o in rerun.outcomes))
        self.assertEqual(rerun.aggregate.mean_report, result.aggregate.mean_report)

    def test_failed_seed_is_reported(self):
        """测试单个采样种子失败时其余种子仍然聚合"""
        def flaky(pool, seed):
            if seed == 2:
                raise CapacityError("正例", 10, 0)
            return self._build(pool, seed)

        result = self._run(GridRunner(self.backend, self.layout), build_sets=flaky)
        self.assertEqual([o.sampling_seed for o in result.failures], [2])
        self.assertEqual(result.aggregate.seeds, [1, 3])

        with self.assertRaises(GridError):
            self._run(GridRunner(self.backend, self.layout, strict=True), build_sets=flaky, scenario="strict")

    def test_too_few_successes(self):
        """测试成功种子不足 2 个时场景失败"""
        def broken(pool, seed):
            if seed != 1:
                raise CapacityError("正例", 10, 0)
            return self._build(pool, seed)

        with self.assertRaises(GridError):
            self._run(GridRunner(self.backend, self.layout), build_sets=broken, scenario="broken")

    def test_functional_entry(self):
        """测试函数式入口返回投票记录与聚合结果"""
        pools = enumerate_seed_pools(self.pool, self.spec.sampling_seeds)
        votes, aggregate = run_grid(self.spec, pools, self.backend, {}, build_sets=self._build,
                                    stage2_config=self.config, test=self.test, test_docs=self.test_docs,
                                    layout=self.layout, scenario="functional")
        self.assertEqual(sorted(votes), [1, 2, 3])
        self.assertEqual(len(votes[1]), len(self.test))
        self.assertEqual(aggregate.seeds, [1, 2, 3])


class TestVoteAndScore(unittest.TestCase):
    """投票与计分测试"""

    def test_missing_model_seed(self):
        """测试缺少某个模型种子的预测"""
        test = make_corpus("t", 1, 1)
        predictions = {1: [Prediction.from_score(doc.id, 0.9) for doc in test]}
        with self.assertRaises(GridError):
            vote_and_score(predictions, [1, 2], test, EnsembleSpec(model_seeds=[1, 2]))

    def test_tie_and_probability_auc(self):
        """测试两票平票按正例处理，并计算平均分数的 AUC"""
        test = make_corpus("t", 1, 1)
        positive, negative = test.ids
        predictions = {
            1: [Prediction.from_score(positive, 0.9), Prediction.from_score(negative, 0.2)],
            2: [Prediction.from_score(positive, 0.4), Prediction.from_score(negative, 0.1)],
        }
        outcome = vote_and_score(predictions, [1, 2], test, EnsembleSpec(model_seeds=[1, 2]))
        finals = {r.doc_id: r.final for r in outcome.votes}
        self.assertEqual(finals, {positive: 1, negative: 0})
        self.assertTrue(outcome.votes[0].was_tie)
        self.assertEqual(outcome.report.f1_macro, 100.0)
        self.assertEqual(outcome.prob_auc, 100.0)

    def test_rules_read_raw_text(self):
        """测试后处理规则在原文上匹配，截断位置之后的药名仍然有效"""
        raw = Corpus(name="raw", documents=(
            Document(id="p", text=" ".join(["wort"] * 320 + ["zolvatin"]), label=1, topic="t", lang="de"),
            Document(id="n", text="heute war das wetter schön", label=0, topic="t", lang="de"),
        ))
        test, _ = normalize_corpus(raw, NormalizerConfig(max_tokens=300))
        self.assertNotIn("zolvatin", test.by_id()["p"].text)
        predictions = {1: [Prediction.from_score("p", 0.9), Prediction.from_score("n", 0.2)]}
        lexicons = {RuleName.MED_PRESENCE: Lexicon(name="med", terms=frozenset({"zolvatin"}))}
        spec = EnsembleSpec(model_seeds=[1])

        outcome = vote_and_score(predictions, [1], test, spec, lexicons, rule_corpus=raw)
        self.assertEqual(outcome.rule_reports[RuleName.MED_PRESENCE].r1, 100.0)
        truncated = vote_and_score(predictions, [1], test, spec, lexicons)
        self.assertEqual(truncated.rule_reports[RuleName.MED_PRESENCE].r1, 0.0)


if __name__ == '__main__':
    unittest.main()
