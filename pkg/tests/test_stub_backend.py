"""
桩后端与两阶段训练测试
"""
import dataclasses
import os
import sys
import tempfile
import unittest

import numpy as np

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.backends.base import (
    FreezePolicy, Prediction, TrainConfig, TrainSampler, epoch_order, fit_stage1, fit_stage2, predict,
)
from src.backends.stub_backend import StubBackend, StubModel, pretrained_encoder
from src.tools.corpus_tools import Corpus, Document
from src.tools.metrics_tools import confusion, report
from src.tools.preprocess_tools import to_processed
from src.tools.sampling_tools import FewShotSets
from src.utils.errors import ArgumentError

MARKERS = ["alpha", "beta", "gamma", "delta", "epsilon"]
FILLER = ["eins", "zwei", "drei", "vier", "fuenf"]


def separable_corpus(name, n_per_class, seed, lang="de"):
    """正例只含标记词，负例只含填充词"""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_per_class):
        docs.append(Document(id=f"{name}-p{i}", text=" ".join(rng.permutation(MARKERS)), label=1,
                             topic="t", lang=lang))
        docs.append(Document(id=f"{name}-n{i}", text=" ".join(rng.permutation(FILLER)), label=0,
                             topic="t", lang=lang))
    return Corpus(name=name, documents=tuple(docs))


class TestStubBackend(unittest.TestCase):
    """桩后端测试"""

    def setUp(self):
        self.backend = StubBackend()
        self.train = separable_corpus("train", 10, seed=1)
        self.dev = separable_corpus("dev", 5, seed=2)
        self.test = separable_corpus("test", 20, seed=3)
        self.config = TrainConfig(learning_rate=0.5, batch_size=4, freeze_policy=FreezePolicy.NONE,
                                  model_seed=78)

    def test_learns_separable_data(self):
        """测试可分数据上 F1 达到 100"""
        model = self.backend.train(self.train, self.dev, self.config)
        predictions = predict(model, to_processed(self.test))
        result = report(confusion([p.label for p in predictions], self.test.labels))
        self.assertEqual(result.f1_macro, 100.0)
        self.assertIsNotNone(model.best_epoch)
        self.assertLessEqual(len(model.training_log), self.config.max_epochs)

    def test_deterministic(self):
        """测试相同种子得到相同分数"""
        first = self.backend.train(self.train, self.dev, self.config)
        second = self.backend.train(self.train, self.dev, self.config)
        docs = to_processed(self.test)
        np.testing.assert_array_equal(first.predict_scores(docs), second.predict_scores(docs))
        self.assertEqual(first.classifier_checksum(), second.classifier_checksum())

    def test_frozen_encoder_unchanged(self):
        """测试冻结编码器时两阶段训练都不改变编码器"""
        frozen = self.config.model_copy(update={'freeze_policy': FreezePolicy.ALL_BUT_CLASSIFIER})
        stage1 = fit_stage1(self.backend, self.train, self.dev, frozen)
        pretrained = StubModel(frozen, pretrained_encoder(frozen.model_id), np.zeros(1), 0.0)
        self.assertEqual(stage1.encoder_checksum(), pretrained.encoder_checksum())

        before = stage1.classifier_checksum()
        target = separable_corpus("target", 5, seed=4)
        stage2 = fit_stage2(stage1, FewShotSets(train=target, dev=self.dev), frozen.with_seed(99))
        self.assertEqual(stage2.encoder_checksum(), stage1.encoder_checksum())
        self.assertNotEqual(stage2.classifier_checksum(), before)
        self.assertEqual(stage1.classifier_checksum(), before)

    def test_unfrozen_encoder_changes(self):
        """测试不冻结时编码器被更新"""
        model = self.backend.train(self.train, self.dev, self.config)
        pretrained = StubModel(self.config, pretrained_encoder(self.config.model_id), np.zeros(1), 0.0)
        self.assertNotEqual(model.encoder_checksum(), pretrained.encoder_checksum())

    def test_save_and_load(self):
        """测试保存后加载得到相同分数"""
        model = self.backend.train(self.train, self.dev, self.config)
        docs = to_processed(self.test)
        with tempfile.TemporaryDirectory() as tmp:
            model.save(tmp)
            self.assertTrue(os.path.exists(os.path.join(tmp, 'training_log.csv')))
            loaded = self.backend.load_model(tmp)
        np.testing.assert_array_equal(model.predict_scores(docs), loaded.predict_scores(docs))
        self.assertEqual(loaded.config, model.config)

    def test_empty_training_set(self):
        """测试空训练集"""
        with self.assertRaises(ArgumentError):
            self.backend.train(Corpus(name="empty"), self.dev, self.config)

    def test_predict_skips_dropped(self):
        """测试预测时跳过已过滤文档"""
        model = self.backend.train(self.train, self.dev, self.config)
        docs = to_processed(self.test)
        docs[0] = dataclasses.replace(docs[0], dropped=True)
        predictions = predict(model, docs)
        self.assertEqual(len(predictions), len(docs) - 1)
        self.assertNotIn(docs[0].id, [p.doc_id for p in predictions])


class TestTrainingHelpers(unittest.TestCase):
    """训练辅助函数测试"""

    def test_prediction_threshold(self):
        """测试分数与标签一致"""
        self.assertEqual(Prediction.from_score("a", 0.5).label, 1)
        self.assertEqual(Prediction.from_score("a", 0.4999).label, 0)
        with self.assertRaises(ArgumentError):
            Prediction(doc_id="a", label=0, score=0.9)

    def test_class_weighted_sampler(self):
        """测试类别加权采样使两类大致均衡"""
        labels = np.array([1] * 10 + [0] * 390)
        rng = np.random.default_rng(0)
        drawn = np.concatenate([labels[epoch_order(labels, TrainSampler.CLASS_WEIGHTED, rng)] for _ in range(20)])
        self.assertAlmostEqual(drawn.mean(), 0.5, delta=0.05)
        order = epoch_order(labels, TrainSampler.RANDOM, rng)
        self.assertEqual(sorted(order.tolist()), list(range(400)))


if __name__ == '__main__':
    unittest.main()
