"""
评估指标测试
"""
import os
import sys
import unittest

import numpy as np
from sklearn.metrics import roc_auc_score

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.tools.metrics_tools import (
    METRIC_COLUMNS, ConfusionMatrix, MetricsReport, auc_from_scores, auc_hard, confusion,
    confusion_by_id, report,
)
from src.utils.errors import AlignmentError, ArgumentError, UndefinedMetricError


class TestReport(unittest.TestCase):
    """指标计算测试"""

    def test_known_matrix(self):
        """测试 21 个正例中预测对 8 个、803 个负例中预测对 796 个"""
        result = report(ConfusionMatrix(tp=8, fp=7, fn=13, tn=796))
        self.assertAlmostEqual(result.p1, 53.33, delta=0.005)
        self.assertAlmostEqual(result.r1, 38.10, delta=0.005)
        self.assertAlmostEqual(result.f1_1, 44.44, delta=0.005)
        self.assertAlmostEqual(result.r0, 99.13, delta=0.005)
        self.assertFalse(result.zero_division)

    def test_high_recall_matrix(self):
        """测试高召回、低精确率的零样本结果"""
        result = report(ConfusionMatrix(tp=20, fp=366, fn=1, tn=437))
        self.assertEqual(round(result.r1, 2), 95.24)
        self.assertEqual(round(result.r0, 2), 54.42)
        self.assertEqual(round(result.p1, 2), 5.18)
        self.assertEqual(round(result.p0, 2), 99.77)
        self.assertEqual(round(result.auc, 2), 74.83)

    def test_auc_equals_macro_recall(self):
        """测试随机混淆矩阵上硬预测 AUC 与宏平均召回一致"""
        rng = np.random.default_rng(0)
        for _ in range(10000):
            pos = int(rng.integers(1, 200))
            neg = int(rng.integers(1, 5000))
            tp = int(rng.integers(0, pos + 1))
            tn = int(rng.integers(0, neg + 1))
            cm = ConfusionMatrix(tp=tp, fp=neg - tn, fn=pos - tp, tn=tn)
            result = report(cm)
            expected = 100.0 * (tp / pos + tn / neg) / 2
            self.assertLessEqual(abs(result.auc - expected), 1e-12)
            self.assertEqual(result.auc, result.r_macro)
            self.assertEqual(auc_hard(cm), result.auc)

    def test_auc_matches_sklearn(self):
        """测试与 sklearn 对硬预测计算的 ROC-AUC 一致"""
        rng = np.random.default_rng(1)
        for _ in range(200):
            gold = rng.integers(0, 2, size=60)
            gold[0], gold[1] = 0, 1
            preds = rng.integers(0, 2, size=60)
            result = report(confusion(preds.tolist(), gold.tolist()))
            self.assertAlmostEqual(result.auc, 100.0 * roc_auc_score(gold, preds), places=9)

    def test_zero_division(self):
        """测试没有正例预测时精确率按 0 处理"""
        result = report(ConfusionMatrix(tp=0, fp=0, fn=3, tn=10))
        self.assertEqual(result.p1, 0.0)
        self.assertIn('p1', result.undefined)
        self.assertTrue(result.zero_division)
        self.assertEqual(result.f1_1, 0.0)

    def test_undefined_auc(self):
        """测试没有正类金标准时 AUC 无定义"""
        with self.assertRaises(UndefinedMetricError):
            auc_hard(ConfusionMatrix(tp=0, fp=2, fn=0, tn=8))

    def test_columns_and_fractions(self):
        """测试列名与小数形式"""
        result = report(ConfusionMatrix(tp=1, fp=1, fn=1, tn=1))
        self.assertEqual(list(result.as_dict()), list(METRIC_COLUMNS))
        self.assertEqual(result.as_fractions()['AUC'], 0.5)
        self.assertEqual(MetricsReport.from_values(result.values()), result)


class TestConfusion(unittest.TestCase):
    """混淆矩阵测试"""

    def test_counts(self):
        """测试四个计数"""
        cm = confusion([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
        self.assertEqual((cm.tp, cm.fp, cm.fn, cm.tn), (2, 1, 1, 1))
        self.assertEqual(cm.n, 5)

    def test_length_mismatch(self):
        """测试长度不一致"""
        with self.assertRaises(AlignmentError):
            confusion([1, 0], [1])

    def test_non_binary(self):
        """测试非二值标签"""
        with self.assertRaises(ArgumentError):
            confusion([2, 0], [1, 0])

    def test_by_id(self):
        """测试按ID对齐"""
        cm = confusion_by_id({'b': 0, 'a': 1}, {'a': 1, 'b': 1})
        self.assertEqual((cm.tp, cm.fn), (1, 1))
        with self.assertRaises(AlignmentError):
            confusion_by_id({'a': 1}, {'a': 1, 'b': 0})

    def test_negative_count(self):
        """测试负数计数"""
        with self.assertRaises(ArgumentError):
            ConfusionMatrix(tp=-1, fp=0, fn=0, tn=0)


class TestProbabilityAuc(unittest.TestCase):
    """概率 AUC 测试"""

    def test_perfect_ranking(self):
        """测试完全可分时 AUC 为 100"""
        self.assertEqual(auc_from_scores([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]), 100.0)

    def test_single_class(self):
        """测试单一类别"""
        with self.assertRaises(UndefinedMetricError):
            auc_from_scores([1, 1], [0.2, 0.9])


if __name__ == '__main__':
    unittest.main()
