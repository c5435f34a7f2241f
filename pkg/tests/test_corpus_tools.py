"""
语料工具测试
"""
import json
import os
import sys
import tempfile
import unittest

# 添加项目根目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.tools.corpus_tools import (
    ASKAPATIENT_TOPIC_WEIGHTS, LIFELINE_TOPIC_WEIGHTS, SYNTHETIC_MED_LEXICON, Corpus, Document,
    SplitSpec, combine, compute_stats, generate_synthetic, held_out_count, load_corpus,
    load_split_assignments, save_corpus, save_split_assignments, split_assignments, stratified_split,
)
from src.tools.lexicon_tools import load_lexicon
from src.utils.errors import (
    ArgumentError, CorpusSchemaError, DataError, DuplicateIdError, LabelValueError, StratificationError,
)


def make_doc(doc_id, label, text="ein kurzer testtext hier", topic="skin", lang="de", source="unit"):
    return Document(id=doc_id, text=text, label=label, topic=topic, lang=lang, source=source)


def make_corpus(n_pos, n_neg, name="toy", prefix="d"):
    docs = [make_doc(f"{prefix}{i}", 1) for i in range(n_pos)]
    docs += [make_doc(f"{prefix}{n_pos + i}", 0) for i in range(n_neg)]
    return Corpus(name=name, documents=tuple(docs))


class TestLoadCorpus(unittest.TestCase):
    """语料读取与校验测试"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _write_jsonl(self, records, name="corpus.jsonl"):
        path = os.path.join(self.tmp.name, name)
        with open(path, 'w', encoding='utf-8') as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        return path

    def _record(self, doc_id, label=0):
        return {"id": doc_id, "text": "Mir geht es gut.", "label": label, "topic": "skin", "lang": "de"}

    def test_load_valid_records(self):
        """测试读取合法语料"""
        path = self._write_jsonl([self._record("a", 1), self._record("b"), self._record("c")])
        corpus = load_corpus(path)
        self.assertEqual(len(corpus), 3)
        self.assertEqual(corpus.ids, ["a", "b", "c"])
        self.assertEqual(corpus.n_pos, 1)
        self.assertEqual(corpus.name, "corpus")

    def test_label_out_of_range(self):
        """测试标签为2时报告出错行"""
        path = self._write_jsonl([self._record("a"), self._record("b", label=2)])
        with self.assertRaises(LabelValueError) as ctx:
            load_corpus(path)
        self.assertEqual(ctx.exception.issues[0][0], 2)
        self.assertEqual(ctx.exception.issues[0][1], 'label')
        self.assertIsInstance(ctx.exception, DataError)

    def test_missing_field(self):
        """测试缺少字段"""
        record = self._record("a")
        del record["topic"]
        path = self._write_jsonl([record])
        with self.assertRaises(CorpusSchemaError) as ctx:
            load_corpus(path)
        self.assertEqual(ctx.exception.issues[0][1], 'topic')

    def test_duplicate_id(self):
        """测试重复ID"""
        path = self._write_jsonl([self._record("a"), self._record("a")])
        with self.assertRaises(DuplicateIdError):
            load_corpus(path)

    def test_missing_file(self):
        """测试文件不存在"""
        with self.assertRaises(CorpusSchemaError):
            load_corpus(os.path.join(self.tmp.name, "nope.jsonl"))

    def test_csv_save_and_load(self):
        """测试 CSV 格式保存后可重新读取"""
        corpus = make_corpus(2, 3)
        path = save_corpus(corpus, os.path.join(self.tmp.name, "toy.csv"), format="csv")
        loaded = load_corpus(path, format="csv", name="toy")
        self.assertEqual(loaded.ids, corpus.ids)
        self.assertEqual(loaded.labels, corpus.labels)

    def test_unknown_format(self):
        """测试不支持的格式"""
        with self.assertRaises(ArgumentError):
            save_corpus(make_corpus(1, 1), os.path.join(self.tmp.name, "x.tsv"), format="tsv")


class TestCombine(unittest.TestCase):
    """语料合并测试"""

    def test_colliding_ids_are_prefixed(self):
        """测试跨语料冲突的ID加前缀"""
        cadec = Corpus(name="cadec", documents=(make_doc("x", 1, lang="en"), make_doc("y", 0, lang="en")))
        psytar = Corpus(name="psytar", documents=(make_doc("x", 0, lang="en"),))
        combined = combine([cadec, psytar], name="source_en")
        self.assertEqual(combined.ids, ["cadec/x", "y", "psytar/x"])
        self.assertEqual(combined.name, "source_en")

    def test_same_name_corpora(self):
        """测试同名语料的冲突ID用位置区分"""
        first = Corpus(name="forum", documents=(make_doc("x", 1, lang="en"),))
        second = Corpus(name="forum", documents=(make_doc("x", 0, lang="en"),))
        combined = combine([first, second], name="source_en")
        self.assertEqual(combined.ids, ["forum_0/x", "forum_1/x"])

    def test_prefixed_id_already_taken(self):
        """测试加前缀后的ID与已有ID相同时继续区分"""
        cadec = Corpus(name="cadec", documents=(make_doc("x", 1, lang="en"), make_doc("cadec/x", 0, lang="en")))
        psytar = Corpus(name="psytar", documents=(make_doc("x", 0, lang="en"),))
        combined = combine([cadec, psytar], name="source_en")
        self.assertEqual(combined.ids, ["cadec~1/x", "cadec/x", "psytar/x"])
        self.assertEqual(len(set(combined.ids)), 3)

    def test_source_totals(self):
        """测试合并后的源语言语料数量"""
        first = generate_synthetic(1200, 300, ASKAPATIENT_TOPIC_WEIGHTS, lang="en", seed=1, source="cadec")
        second = generate_synthetic(483, 154, ASKAPATIENT_TOPIC_WEIGHTS, lang="en", seed=2, source="psytar")
        combined = combine([first, second], name="cadec_psytar")
        self.assertEqual(len(combined), 2137)
        self.assertEqual(combined.n_pos, 1683)
        self.assertEqual(combined.n_neg, 454)

    def test_empty_input(self):
        """测试空输入"""
        with self.assertRaises(ArgumentError):
            combine([], name="empty")


class TestStratifiedSplit(unittest.TestCase):
    """分层划分测试"""

    def test_held_out_rounding(self):
        """测试测试集数量向上取整"""
        self.assertEqual(held_out_count(101, 0.2), 21)
        self.assertEqual(held_out_count(4068, 0.2), 814)
        self.assertEqual(held_out_count(5, 0.2), 1)

    def test_target_split_sizes(self):
        """测试 101/4068 语料在不同种子下的划分大小一致"""
        corpus = make_corpus(101, 4068, name="lifeline")
        for seed in (0, 42, 123):
            train_dev, test = stratified_split(corpus, SplitSpec(test_fraction=0.2, seed=seed))
            self.assertEqual(test.n_pos, 21)
            self.assertEqual(len(test), 835)
            self.assertEqual(train_dev.n_pos, 80)
            self.assertFalse(set(train_dev.ids) & set(test.ids))
            self.assertEqual(len(train_dev) + len(test), len(corpus))
            self.assertEqual(train_dev.name, "lifeline_train_dev")

    def test_small_corpus(self):
        """测试 5+5 的小语料"""
        train_dev, test = stratified_split(make_corpus(5, 5), SplitSpec(test_fraction=0.2, seed=3))
        self.assertEqual(test.n_pos, 1)
        self.assertEqual(test.n_neg, 1)

    def test_deterministic(self):
        """测试同一种子结果一致，并保持原顺序"""
        corpus = make_corpus(30, 70)
        first = stratified_split(corpus, SplitSpec(seed=9))
        second = stratified_split(corpus, SplitSpec(seed=9))
        self.assertEqual(first[1].ids, second[1].ids)
        order = {doc_id: i for i, doc_id in enumerate(corpus.ids)}
        self.assertEqual(first[1].ids, sorted(first[1].ids, key=order.get))

    def test_missing_label(self):
        """测试缺少某个标签时无法分层"""
        with self.assertRaises(StratificationError):
            stratified_split(make_corpus(0, 10), SplitSpec())

    def test_invalid_fraction(self):
        """测试非法的 test_fraction"""
        with self.assertRaises(ArgumentError):
            SplitSpec(test_fraction=1.0)

    def test_assignments_round_trip(self):
        """测试划分记录的保存与读取"""
        train_dev, test = stratified_split(make_corpus(5, 5), SplitSpec(seed=1))
        assignments = split_assignments(train_dev, test)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_split_assignments(assignments, os.path.join(tmp, "split.jsonl"))
            self.assertEqual(load_split_assignments(path), assignments)


class TestStats(unittest.TestCase):
    """语料统计测试"""

    def test_single_document(self):
        """测试单文档的平均词数"""
        stats = compute_stats(Corpus(name="one", documents=(make_doc("a", 1, text="a b c"),)))
        self.assertEqual(stats.avg_tokens, 3.0)
        self.assertEqual(stats.avg_sentences, 1.0)
        self.assertIsNone(stats.pos_neg_ratio)

    def test_ratio_text(self):
        """测试正负比显示"""
        stats = compute_stats(make_corpus(101, 4068))
        self.assertEqual(stats.ratio_text, "1 : 40.3")

    def test_split_and_filtered_sizes(self):
        """测试按划分统计以及过滤后的大小"""
        corpus = make_corpus(5, 5)
        train_dev, test = stratified_split(corpus, SplitSpec(seed=1))
        stats = compute_stats(corpus, split_assignments(train_dev, test), dropped_ids={test.ids[0]})
        self.assertEqual(stats.per_split['test']['n'], 2)
        self.assertEqual(stats.filtered_split_sizes['test'], 1)
        self.assertEqual(stats.filtered_split_sizes['train_dev'], 8)


class TestSyntheticCorpus(unittest.TestCase):
    """合成语料测试"""

    def test_positive_documents_are_longer(self):
        """测试正例平均长度大于负例"""
        corpus = generate_synthetic(100, 400, LIFELINE_TOPIC_WEIGHTS, lang="de", seed=7)
        pos = [doc.n_tokens() for doc in corpus if doc.label == 1]
        neg = [doc.n_tokens() for doc in corpus if doc.label == 0]
        self.assertGreater(sum(pos) / len(pos), sum(neg) / len(neg))
        self.assertEqual(corpus.n_pos, 100)
        self.assertEqual(corpus.n_neg, 400)

    def test_empty_corpus(self):
        """测试 0 正例 5 负例"""
        corpus = generate_synthetic(0, 5, LIFELINE_TOPIC_WEIGHTS, lang="de", seed=1)
        self.assertEqual(corpus.labels, [0] * 5)

    def test_deterministic(self):
        """测试相同种子生成相同语料"""
        first = generate_synthetic(10, 20, LIFELINE_TOPIC_WEIGHTS, lang="de", seed=3)
        second = generate_synthetic(10, 20, LIFELINE_TOPIC_WEIGHTS, lang="de", seed=3)
        self.assertEqual([d.text for d in first], [d.text for d in second])
        self.assertTrue(first.ids[0].startswith("synthetic-de-"))

    def test_invalid_weights(self):
        """测试主题权重总和不为1"""
        with self.assertRaises(ArgumentError):
            generate_synthetic(1, 1, {"skin": 0.5, "heart": 0.4}, lang="de", seed=1)

    def test_positives_mention_medication(self):
        """测试每个正例都包含药名"""
        lexicon = load_lexicon(SYNTHETIC_MED_LEXICON)
        corpus = generate_synthetic(50, 10, LIFELINE_TOPIC_WEIGHTS, lang="de", seed=11)
        for doc in corpus:
            if doc.label == 1:
                self.assertTrue(lexicon.matches(doc.text), doc.text)


if __name__ == '__main__':
    unittest.main()
