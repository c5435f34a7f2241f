"""
词表后处理测试
"""
import os
import sys
import tempfile
import unittest

import numpy as np

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.tools.corpus_tools import Corpus, Document
from src.tools.lexicon_tools import (
    Lexicon, RuleName, apply_med_rule, apply_rule, apply_wh_rule, corrected_labels, evaluate_rules,
    load_lexicon,
)
from src.tools.metrics_tools import confusion_by_id, report
from src.utils.errors import AlignmentError, ArgumentError, LexiconLoadError

PROJECT_ROOT = os.path.join(os.path.dirname(__file__), '..')

VOCAB = ["mir", "geht", "es", "schlecht", "heute", "seit", "ich", "nehme", "zolvatin", "ibuprofen",
         "wechseljahre", "periode", "kopfschmerzen", "arzt", "gut"]


def make_doc(doc_id, text, label):
    return Document(id=doc_id, text=text, label=label, topic="women's health", lang="de")


class TestLexicon(unittest.TestCase):
    """词表匹配测试"""

    def setUp(self):
        self.lexicon = Lexicon(name="med", terms=frozenset({"zolvatin", "hormon ersatz"}))

    def test_case_insensitive_whole_token(self):
        """测试大小写不敏感的整词匹配"""
        self.assertEqual(self.lexicon.find("Seit ich Zolvatin. nehme"), "zolvatin")
        self.assertIsNone(self.lexicon.find("zolvatinx hilft"))

    def test_multi_word_phrase(self):
        """测试多词短语"""
        self.assertTrue(self.lexicon.matches("eine Hormon-Ersatz Therapie"))
        self.assertFalse(self.lexicon.matches("ersatz hormon"))

    def test_load_lexicon(self):
        """测试读取词表文件，忽略注释与空行"""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "meds.txt")
            with open(path, 'w', encoding='utf-8') as f:
                f.write("# Kommentar\n\nIbuprofen\n  ibuprofen \nZolvatin\n")
            lexicon = load_lexicon(path)
            self.assertEqual(lexicon.name, "meds")
            self.assertEqual(lexicon.terms, frozenset({"ibuprofen", "zolvatin"}))

            empty = os.path.join(tmp, "empty.txt")
            with open(empty, 'w', encoding='utf-8') as f:
                f.write("# nur Kommentar\n")
            with self.assertRaises(LexiconLoadError):
                load_lexicon(empty)

        with self.assertRaises(LexiconLoadError):
            load_lexicon(os.path.join(PROJECT_ROOT, "data", "lexicons", "missing.txt"))

    def test_bundled_womens_health_lexicon(self):
        """测试自带的妇女健康词表能识别缩写"""
        lexicon = load_lexicon(os.path.join(PROJECT_ROOT, "data", "lexicons", "womens_health.txt"))
        self.assertTrue(lexicon.matches("Meine WJ sind schlimm"))

    def test_rule_names(self):
        """测试规则名解析"""
        self.assertIs(RuleName.parse("med"), RuleName.MED_PRESENCE)
        self.assertIs(RuleName.parse("womens_health"), RuleName.WOMENS_HEALTH)
        self.assertEqual(RuleName.WOMENS_HEALTH.short, "wh")
        with self.assertRaises(ArgumentError):
            RuleName.parse("spelling")


class TestRules(unittest.TestCase):
    """后处理规则测试"""

    def setUp(self):
        self.med = Lexicon(name="med", terms=frozenset({"zolvatin", "ibuprofen"}))
        self.wh = Lexicon(name="wh", terms=frozenset({"wechseljahre", "periode"}))

    def test_med_rule(self):
        """测试没有药名的正例预测被改判"""
        kept = apply_med_rule(make_doc("a", "seit ich Zolvatin nehme habe ich kopfschmerzen", 1), 1, self.med)
        flipped = apply_med_rule(make_doc("b", "mir geht es heute schlecht", 0), 1, self.med)
        untouched = apply_med_rule(make_doc("c", "mir geht es gut", 0), 0, self.med)
        self.assertEqual((kept.corrected, kept.flipped, kept.matched_term), (1, False, "zolvatin"))
        self.assertEqual((flipped.corrected, flipped.flipped), (0, True))
        self.assertEqual((untouched.corrected, untouched.flipped), (0, False))

    def test_wh_rule(self):
        """测试含妇女健康词条的正例预测被改判"""
        flipped = apply_wh_rule(make_doc("a", "die Wechseljahre machen mir zu schaffen", 0), 1, self.wh)
        kept = apply_wh_rule(make_doc("b", "ibuprofen macht kopfschmerzen", 1), 1, self.wh)
        self.assertEqual((flipped.corrected, flipped.matched_term), (0, "wechseljahre"))
        self.assertEqual(kept.corrected, 1)

    def test_med_rule_improves_precision(self):
        """测试药名规则去掉假阳性后精确率提高"""
        docs = [
            make_doc("p1", "seit ich zolvatin nehme habe ich kopfschmerzen", 1),
            make_doc("p2", "ibuprofen macht mir übelkeit", 1),
            make_doc("n1", "mir geht es heute schlecht", 0),
            make_doc("n2", "der arzt war nett", 0),
            make_doc("n3", "zolvatin hilft gut", 0),
        ]
        gold = Corpus(name="gold", documents=tuple(docs))
        preds = {"p1": 1, "p2": 1, "n1": 1, "n2": 1, "n3": 1}
        before = report(confusion_by_id(preds, {d.id: d.label for d in docs}))
        after = evaluate_rules(preds, gold, {RuleName.MED_PRESENCE: self.med})[RuleName.MED_PRESENCE]
        self.assertAlmostEqual(before.p1, 40.0)
        self.assertAlmostEqual(after.p1, 200.0 / 3)
        self.assertEqual(after.r1, before.r1)

    def test_random_fixtures(self):
        """测试随机样本上规则幂等、只会 1 改 0、且正类召回不升高"""
        rng = np.random.default_rng(2024)
        lexicons = {RuleName.MED_PRESENCE: self.med, RuleName.WOMENS_HEALTH: self.wh}
        for fixture in range(1000):
            n_docs = int(rng.integers(1, 12))
            docs = {}
            gold = {}
            preds = {}
            for i in range(n_docs):
                words = [VOCAB[int(j)] for j in rng.integers(0, len(VOCAB), size=int(rng.integers(1, 8)))]
                doc_id = f"f{fixture}-{i}"
                docs[doc_id] = make_doc(doc_id, " ".join(words), int(rng.integers(0, 2)))
                gold[doc_id] = docs[doc_id].label
                preds[doc_id] = int(rng.integers(0, 2))
            original = report(confusion_by_id(preds, gold))

            for rule, lexicon in lexicons.items():
                outcomes = apply_rule(rule, docs, preds, lexicon)
                corrected = corrected_labels(outcomes)
                for outcome in outcomes:
                    if outcome.original == 0:
                        self.assertEqual(outcome.corrected, 0)
                again = corrected_labels(apply_rule(rule, docs, corrected, lexicon))
                self.assertEqual(again, corrected)
                self.assertLessEqual(report(confusion_by_id(corrected, gold)).r1, original.r1)

    def test_rules_are_independent(self):
        """测试两条规则都从原始预测出发"""
        docs = (make_doc("a", "die periode ohne medikament", 0), make_doc("b", "zolvatin und periode", 1))
        gold = Corpus(name="gold", documents=docs)
        preds = {"a": 1, "b": 1}
        reports = evaluate_rules(preds, gold, {"med": self.med, "wh": self.wh})
        self.assertEqual(reports[RuleName.MED_PRESENCE].r1, 100.0)
        self.assertEqual(reports[RuleName.WOMENS_HEALTH].r1, 0.0)

    def test_alignment(self):
        """测试预测与文档不对齐"""
        gold = Corpus(name="gold", documents=(make_doc("a", "mir geht es gut", 0),))
        with self.assertRaises(AlignmentError):
            evaluate_rules({"b": 1}, gold, {"med": self.med})
        with self.assertRaises(AlignmentError):
            apply_rule("med", gold.by_id(), {"b": 1}, self.med)


if __name__ == '__main__':
    unittest.main()
