"""
词向量 SVM 基线测试
"""
import importlib.util
import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.backends.base import TrainConfig, predict
from src.backends.svm_backend import (
    HashedEmbeddingSource, KeyedVectorsEmbeddingSource, MultilingualEmbeddingSource, SvmBackend, SvmModel,
    balanced_class_weights, document_vector, fit_svm_baseline,
)
from src.tools.corpus_tools import Corpus, Document
from src.tools.metrics_tools import confusion, report
from src.tools.preprocess_tools import to_processed
from src.utils.errors import ArgumentError, ConfigError


class TableEmbeddings:
    """测试用词向量表"""

    def __init__(self, table, is_aligned=True):
        self.table = table
        self.dim = len(next(iter(table.values())))
        self.is_aligned = is_aligned

    def vector(self, word, lang):
        return self.table.get(word)


def gaussian_corpus(name, n_pos, n_neg, shift, seed, table):
    """每个文档一个词，正例词向量均值平移 shift"""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_pos + n_neg):
        label = 1 if i < n_pos else 0
        token = f"{name}{i}"
        table[token] = rng.normal(shift if label else 0.0, 1.0, size=5)
        docs.append(Document(id=token, text=token, label=label, topic="t", lang="de"))
    return Corpus(name=name, documents=tuple(docs))


class FixedDecision:
    """返回固定决策值的分类器"""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def decision_function(self, matrix):
        return self.values[:len(matrix)]


class TestSvmBaseline(unittest.TestCase):
    """SVM 基线测试"""

    def test_separable_data(self):
        """测试可分数据上全部预测正确"""
        embeddings = HashedEmbeddingSource(dim=20, seed=1)
        docs = []
        for i in range(12):
            docs.append(Document(id=f"p{i}", text="kopfschmerzen übelkeit ausschlag", label=1, topic="t", lang="de"))
            docs.append(Document(id=f"n{i}", text="spaziergang wetter urlaub", label=0, topic="t", lang="de"))
        corpus = Corpus(name="sep", documents=tuple(docs))
        model = fit_svm_baseline(corpus, embeddings)
        predictions = predict(model, to_processed(corpus))
        self.assertEqual([p.label for p in predictions], corpus.labels)

    def test_balanced_weights_help_minority_recall(self):
        """测试 1:40 不均衡时 balanced 权重提高正类召回"""
        table = {}
        train = gaussian_corpus("train", 10, 400, shift=1.0, seed=0, table=table)
        test = gaussian_corpus("test", 40, 400, shift=1.0, seed=1, table=table)
        embeddings = TableEmbeddings(table)
        test_docs = to_processed(test)

        balanced = fit_svm_baseline(train, embeddings, class_weight="balanced")
        unweighted = fit_svm_baseline(train, embeddings, class_weight=None)
        r1_balanced = report(confusion([p.label for p in predict(balanced, test_docs)], test.labels)).r1
        r1_unweighted = report(confusion([p.label for p in predict(unweighted, test_docs)], test.labels)).r1
        self.assertGreater(r1_balanced, r1_unweighted)

    def test_unweighted_training_skips_class_weights(self):
        """测试不加权训练不计算类别权重"""
        table = {}
        corpus = gaussian_corpus("u", 10, 40, 3.0, 5, table)
        with patch('src.backends.svm_backend.balanced_class_weights', wraps=balanced_class_weights) as weights:
            fit_svm_baseline(corpus, TableEmbeddings(table), class_weight=None)
            weights.assert_not_called()
            fit_svm_baseline(corpus, TableEmbeddings(table), class_weight="balanced")
            self.assertEqual(weights.call_count, 1)

    def test_zero_decision_is_negative(self):
        """测试决策值为 0 时判为负例，与 SVC.predict 一致"""
        table = {w: np.ones(2) for w in ("a", "b", "c", "d")}
        corpus = Corpus(name="z", documents=tuple(
            Document(id=w, text=w, label=0, topic="t", lang="de") for w in ("a", "b", "c", "d")))
        model = SvmModel(TrainConfig(learning_rate=1.0, batch_size=1, model_id="svm"),
                         FixedDecision([0.0, 1e-20, -1e-20, 2.0]), TableEmbeddings(table))
        predictions = predict(model, to_processed(corpus))
        self.assertEqual([p.label for p in predictions], [0, 1, 0, 1])
        self.assertLess(predictions[0].score, 0.5)

    def test_class_weight_ratio(self):
        """测试 101/4068 的类别权重比"""
        weights = balanced_class_weights([1] * 101 + [0] * 4068)
        self.assertAlmostEqual(weights[1] / weights[0], 40.3, places=1)
        self.assertAlmostEqual(weights[0] * 4068 + weights[1] * 101, 4169.0)
        with self.assertRaises(ArgumentError):
            balanced_class_weights([0, 0, 0])

    def test_mixed_languages_need_aligned_vectors(self):
        """测试混合语言训练需要对齐的词向量"""
        table = {"gut": np.ones(3), "good": -np.ones(3)}
        corpus = Corpus(name="mixed", documents=(
            Document(id="a", text="gut", label=1, topic="t", lang="de"),
            Document(id="b", text="good", label=0, topic="t", lang="en"),
        ))
        with self.assertRaises(ArgumentError):
            fit_svm_baseline(corpus, TableEmbeddings(table, is_aligned=False))
        fit_svm_baseline(corpus, TableEmbeddings(table, is_aligned=True))

    def test_document_vector(self):
        """测试文档向量为已知词向量的平均，全为未知词时为零向量"""
        embeddings = TableEmbeddings({"a": np.array([1.0, 3.0]), "b": np.array([3.0, 5.0])})
        np.testing.assert_array_equal(document_vector(["a", "b", "x"], "de", embeddings), [2.0, 4.0])
        np.testing.assert_array_equal(document_vector(["x"], "de", embeddings), [0.0, 0.0])

    def test_multilingual_source(self):
        """测试按语言选择词向量"""
        source = MultilingualEmbeddingSource({
            'de': TableEmbeddings({"gut": np.ones(2)}),
            'en': TableEmbeddings({"good": np.zeros(2)}),
        }, is_aligned=True)
        np.testing.assert_array_equal(source.vector("gut", "de"), np.ones(2))
        with self.assertRaises(ArgumentError):
            source.vector("bon", "fr")
        with self.assertRaises(ConfigError):
            MultilingualEmbeddingSource({'de': TableEmbeddings({"a": np.ones(2)}),
                                         'en': TableEmbeddings({"a": np.ones(3)})})

    def test_backend_train_and_load(self):
        """测试后端训练记录 dev 指标，并可保存加载"""
        table = {}
        train = gaussian_corpus("tr", 20, 60, shift=2.0, seed=3, table=table)
        backend = SvmBackend(TableEmbeddings(table))
        self.assertFalse(backend.capabilities.two_stage)
        config = TrainConfig(learning_rate=1.0, batch_size=1, model_id="svm")
        model = backend.train(train, train, config)
        self.assertEqual(model.best_epoch, 1)
        self.assertEqual(len(model.training_log), 1)
        docs = to_processed(train)
        with tempfile.TemporaryDirectory() as tmp:
            model.save(tmp)
            loaded = backend.load_model(tmp)
        np.testing.assert_allclose(model.predict_scores(docs), loaded.predict_scores(docs))


@unittest.skipUnless(importlib.util.find_spec("gensim"), "需要安装 gensim")
class TestKeyedVectors(unittest.TestCase):
    """gensim 词向量加载测试"""

    def setUp(self):
        from gensim.models import KeyedVectors

        self.kv = KeyedVectors(vector_size=3)
        self.kv.add_vectors(["hallo", "welt"], np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def test_lookup(self):
        """测试小写查询与未登录词"""
        source = KeyedVectorsEmbeddingSource(self.kv)
        np.testing.assert_array_equal(source.vector("Hallo", "de"), [1.0, 0.0, 0.0])
        self.assertIsNone(source.vector("unbekannt", "de"))

    def test_load_formats(self):
        """测试读取 word2vec 文本格式与 gensim 原生格式"""
        with tempfile.TemporaryDirectory() as tmp:
            text_path = os.path.join(tmp, "vectors.txt")
            self.kv.save_word2vec_format(text_path, binary=False)
            native_path = os.path.join(tmp, "vectors.kv")
            self.kv.save(native_path)
            for path in (text_path, native_path):
                source = KeyedVectorsEmbeddingSource.load(path)
                self.assertEqual(source.dim, 3)
                np.testing.assert_allclose(source.vector("welt", "de"), [0.0, 1.0, 0.0])
            with self.assertRaises(ConfigError):
                KeyedVectorsEmbeddingSource.load(os.path.join(tmp, "missing.vec"))


if __name__ == '__main__':
    unittest.main()
