"""
报告生成工具
语料统计表、指标报告、聚合结果、投票与预测文件、错误分析和直方图
"""
import csv
import logging
import os
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from src.backends.base import Prediction
from src.tasks.ensemble_voting import AggregateResult, VoteRecord
from src.tools.corpus_tools import Corpus, CorpusStats
from src.tools.metrics_tools import METRIC_COLUMNS, MetricsReport
from src.tools.preprocess_tools import ProcessedDocument
from src.utils.errors import CorpusSchemaError

logger = logging.getLogger(__name__)

SPLIT_ORDER = ('train_dev', 'test', 'all', 'unassigned')


def _ensure_parent(path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """生成 Markdown 表格，数字列右对齐"""
    def is_number(value) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool)

    align = ['---:' if rows and all(is_number(r[i]) for r in rows) else ':---' for i in range(len(headers))]
    lines = ["| " + " | ".join(str(h) for h in headers) + " |", "| " + " | ".join(align) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


def format_cell(mean: float, std: Optional[float], decimals: int = 2) -> str:
    """百分制 "均值 ± 标准差" 单元格"""
    if std is None:
        return f"{mean:.{decimals}f}"
    return f"{mean:.{decimals}f} ± {std:.{decimals}f}"


# ---------------------------------------------------------------------------
# 预测与投票文件
# ---------------------------------------------------------------------------

def write_predictions_csv(predictions: Sequence[Prediction], path: str) -> str:
    _ensure_parent(path)
    frame = pd.DataFrame([{'doc_id': p.doc_id, 'label': p.label, 'score': p.score} for p in predictions],
                         columns=['doc_id', 'label', 'score'])
    frame.to_csv(path, index=False, encoding='utf-8')
    return path


def read_predictions_csv(path: str) -> List[Prediction]:
    frame = pd.read_csv(path, dtype={'doc_id': str}, keep_default_na=False, float_precision='round_trip')
    return [Prediction(doc_id=row.doc_id, label=int(row.label), score=float(row.score))
            for row in frame.itertuples(index=False)]


def write_votes_csv(records: Sequence[VoteRecord], path: str) -> str:
    """列为 doc_id, v1..vN, final, was_tie"""
    _ensure_parent(path)
    n_votes = len(records[0].votes) if records else 0
    columns = ['doc_id'] + [f"v{i + 1}" for i in range(n_votes)] + ['final', 'was_tie']
    rows = [[r.doc_id, *r.votes, r.final, str(r.was_tie).lower()] for r in records]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, encoding='utf-8')
    return path


def read_votes_csv(path: str) -> List[VoteRecord]:
    frame = pd.read_csv(path, dtype={'doc_id': str}, keep_default_na=False)
    vote_columns = [c for c in frame.columns if c.startswith('v') and c[1:].isdigit()]
    records = []
    for row in frame.to_dict(orient='records'):
        records.append(VoteRecord(
            doc_id=row['doc_id'],
            votes=tuple(int(row[c]) for c in vote_columns),
            final=int(row['final']),
            was_tie=str(row['was_tie']).lower() == 'true',
        ))
    return records


def read_labels_csv(path: str) -> Dict[str, int]:
    """
    读取预测标签：预测文件取 label 列，投票文件取 final 列

    Raises:
        CorpusSchemaError: 缺少 doc_id 或标签列
    """
    frame = pd.read_csv(path, dtype={'doc_id': str}, keep_default_na=False)
    column = 'final' if 'final' in frame.columns else 'label'
    if 'doc_id' not in frame.columns or column not in frame.columns:
        raise CorpusSchemaError(f"{path} 需要 doc_id 与 label（或 final）列，实际为 {list(frame.columns)}")
    return {str(doc_id): int(label) for doc_id, label in zip(frame['doc_id'], frame[column])}


def write_corrected_csv(outcomes, path: str) -> str:
    """后处理结果：doc_id, original, corrected, flipped, matched_term"""
    _ensure_parent(path)
    frame = pd.DataFrame(
        [{'doc_id': o.doc_id, 'original': o.original, 'corrected': o.corrected,
          'flipped': str(o.flipped).lower(), 'matched_term': o.matched_term or ''} for o in outcomes],
        columns=['doc_id', 'original', 'corrected', 'flipped', 'matched_term'],
    )
    frame.to_csv(path, index=False, encoding='utf-8')
    return path


def write_flip_log(outcomes, path: str) -> str:
    """改判审计记录，只含被改判的文档：doc_id, rule, original, corrected, matched_term"""
    _ensure_parent(path)
    flips = [o for o in outcomes if o.flipped]
    frame = pd.DataFrame(
        [{'doc_id': o.doc_id, 'rule': o.rule.value, 'original': o.original, 'corrected': o.corrected,
          'matched_term': o.matched_term or ''} for o in flips],
        columns=['doc_id', 'rule', 'original', 'corrected', 'matched_term'],
    )
    frame.to_csv(path, index=False, encoding='utf-8')
    return path


# ---------------------------------------------------------------------------
# 指标报告
# ---------------------------------------------------------------------------

def write_report(report: MetricsReport, out_dir: str, title: str = "report", decimals: int = 2) -> Tuple[str, str]:
    """
    单个指标报告

    report.csv 为 0-1 小数，report.md 为百分制
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, 'report.csv')
    md_path = os.path.join(out_dir, 'report.md')

    row = {'name': title, **report.as_fractions(), 'zero_division': ';'.join(report.undefined)}
    pd.DataFrame([row]).to_csv(csv_path, index=False, encoding='utf-8', float_format='%.6f')

    cells = [format_cell(v, None, decimals) for v in report.values()]
    content = f"# {title}\n\n" + markdown_table(['', *METRIC_COLUMNS], [[title, *cells]])
    if report.undefined:
        content += f"\n分母为零、按 0 计的指标: {', '.join(report.undefined)}\n"
    with open(md_path, 'w', encoding='utf-8') as f:
        f.write(content)
    logger.info(f"报告已写入 {csv_path}")
    return csv_path, md_path


def aggregate_rows(rows: Sequence[Tuple[str, AggregateResult]], decimals: int = 2) -> List[List[str]]:
    table = []
    for name, result in rows:
        means = result.mean_report.values()
        stds = result.std_report.values() if result.std_report else [None] * len(means)
        table.append([name, *(format_cell(m, s, decimals) for m, s in zip(means, stds))])
    return table


def write_aggregate(rows: Sequence[Tuple[str, AggregateResult]], out_dir: str, decimals: int = 2,
                    title: str = "Results") -> List[str]:
    """
    聚合结果表

    aggregate.csv / aggregate.md 为 "均值 ± 标准差" 百分制单元格；
    aggregate_raw.csv 为 0-1 小数的均值与标准差列。
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, 'aggregate.csv')
    md_path = os.path.join(out_dir, 'aggregate.md')
    raw_path = os.path.join(out_dir, 'aggregate_raw.csv')

    table = aggregate_rows(rows, decimals)
    pd.DataFrame(table, columns=['scenario', *METRIC_COLUMNS]).to_csv(csv_path, index=False, encoding='utf-8')

    raw_rows = []
    for name, result in rows:
        raw = {'scenario': name, 'n_seeds': len(result.per_seed_reports)}
        std_values = result.std_report.as_fractions() if result.std_report else {}
        for column, value in result.mean_report.as_fractions().items():
            raw[f"{column}_mean"] = value
            raw[f"{column}_std"] = std_values.get(column, float('nan'))
        raw_rows.append(raw)
    pd.DataFrame(raw_rows).to_csv(raw_path, index=False, encoding='utf-8', float_format='%.8f')

    with open(md_path, 'w', encoding='utf-8') as f:
        f.write(f"# {title}\n\n")
        f.write(markdown_table(['scenario', *METRIC_COLUMNS], table))
    logger.info(f"聚合结果已写入 {csv_path}")
    return [csv_path, md_path, raw_path]


def write_seed_table(result: AggregateResult, out_dir: str, stem: str = "source_results",
                     decimals: int = 2, extra: Optional[Mapping[int, Dict[str, float]]] = None) -> List[str]:
    """每个种子一行，末尾为均值与标准差行"""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    md_path = os.path.join(out_dir, f"{stem}.md")

    seeds = result.seeds or list(range(1, len(result.per_seed_reports) + 1))
    rows = []
    for seed, seed_report in zip(seeds, result.per_seed_reports):
        row = [str(seed), *(round(v, decimals) for v in seed_report.values())]
        rows.append(row)
    rows.append(['mean', *(round(v, decimals) for v in result.mean_report.values())])
    if result.std_report is not None:
        rows.append(['std', *(round(v, decimals) for v in result.std_report.values())])

    frame = pd.DataFrame(rows, columns=['seed', *METRIC_COLUMNS])
    if extra:
        for key in sorted({k for values in extra.values() for k in values}):
            frame[key] = [extra.get(int(s), {}).get(key, '') if s.isdigit() else '' for s in frame['seed']]
    frame.to_csv(csv_path, index=False, encoding='utf-8')
    with open(md_path, 'w', encoding='utf-8') as f:
        f.write(markdown_table(list(frame.columns), frame.values.tolist()))
    return [csv_path, md_path]


# ---------------------------------------------------------------------------
# 语料统计
# ---------------------------------------------------------------------------

def stats_table(stats: CorpusStats) -> Tuple[List[str], List[List]]:
    """主题 × 划分计数，底部为总数与平均词数、句数"""
    splits = sorted({s for counts in stats.per_topic_counts.values() for s in counts},
                    key=lambda s: SPLIT_ORDER.index(s) if s in SPLIT_ORDER else len(SPLIT_ORDER))
    headers = ['topic', *splits, 'total']
    rows = []
    for topic, counts in stats.per_topic_counts.items():
        rows.append([topic, *(counts.get(s, 0) for s in splits), sum(counts.values())])
    rows.append(['total', *(stats.per_split.get(s, {}).get('n', 0) for s in splits), stats.n_total])
    if stats.filtered_split_sizes:
        rows.append(['total (filtered)', *(stats.filtered_split_sizes.get(s, 0) for s in splits),
                     sum(stats.filtered_split_sizes.values())])
    rows.append(['avg #tokens', *(round(stats.per_split.get(s, {}).get('avg_tokens', 0.0), 1) for s in splits),
                 round(stats.avg_tokens, 1)])
    rows.append(['avg #sentences', *(round(stats.per_split.get(s, {}).get('avg_sentences', 0.0), 1) for s in splits),
                 round(stats.avg_sentences, 1)])
    return headers, rows


def write_stats(stats: CorpusStats, out_dir: str, name: str = "corpus") -> List[str]:
    """stats.csv、stats.md 以及每个标签的长度直方图数据"""
    os.makedirs(out_dir, exist_ok=True)
    headers, rows = stats_table(stats)
    csv_path = os.path.join(out_dir, 'stats.csv')
    md_path = os.path.join(out_dir, 'stats.md')
    pd.DataFrame(rows, columns=headers).to_csv(csv_path, index=False, encoding='utf-8')

    summary = [[name, stats.n_total, stats.n_neg, stats.n_pos, stats.ratio_text]]
    with open(md_path, 'w', encoding='utf-8') as f:
        f.write(f"# {name}\n\n")
        f.write(markdown_table(['corpus', 'overall', 'neg', 'pos', 'ratio'], summary))
        f.write("\n")
        f.write(markdown_table(headers, rows))
        if stats.per_source_counts and len(stats.per_source_counts) > 1:
            f.write("\n")
            f.write(markdown_table(['source', 'neg', 'pos'],
                                   [[s, c[0], c[1]] for s, c in stats.per_source_counts.items()]))

    outputs = [csv_path, md_path]
    for label, histogram in stats.token_length_histogram_per_label.items():
        hist_path = os.path.join(out_dir, f"histogram_label_{label}.csv")
        edges = histogram['edges']
        with open(hist_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['bin_left', 'bin_right', 'count'])
            for i, count in enumerate(histogram['counts']):
                writer.writerow([f"{edges[i]:.2f}", f"{edges[i + 1]:.2f}", count])
        outputs.append(hist_path)
    logger.info(f"统计结果已写入 {out_dir}")
    return outputs


def plot_histograms(stats: CorpusStats, path: str, title: str = "") -> str:
    """按标签绘制词数直方图"""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    import seaborn as sns

    _ensure_parent(path)
    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    labels = {0: "no ADR (0)", 1: "ADR (1)"}
    for label, histogram in sorted(stats.token_length_histogram_per_label.items()):
        edges = histogram['edges']
        centers = [(edges[i] + edges[i + 1]) / 2 for i in range(len(edges) - 1)]
        total = sum(histogram['counts']) or 1
        density = [c / total for c in histogram['counts']]
        sns.lineplot(x=centers, y=density, ax=ax, label=labels.get(label, str(label)), drawstyle='steps-mid')
    ax.set_xlabel("#tokens")
    ax.set_ylabel("share of documents")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# 错误分析
# ---------------------------------------------------------------------------

def write_error_analysis(test: Corpus, records: Sequence[VoteRecord], out_dir: str,
                         processed: Optional[Mapping[str, ProcessedDocument]] = None,
                         snippet_chars: int = 160) -> List[str]:
    """
    列出误分类的测试文档，并按主题统计混淆计数

    Args:
        test: 测试语料（金标准）
        records: 投票记录
        out_dir: 输出目录
        processed: ID -> 预处理结果，用于标记截断
    """
    os.makedirs(out_dir, exist_ok=True)
    docs = test.by_id()
    error_rows = []
    topic_counts: Dict[str, Dict[str, int]] = {}
    for record in records:
        doc = docs[record.doc_id]
        counts = topic_counts.setdefault(doc.topic, {'tp': 0, 'fp': 0, 'fn': 0, 'tn': 0})
        key = {(1, 1): 'tp', (1, 0): 'fp', (0, 1): 'fn', (0, 0): 'tn'}[(record.final, doc.label)]
        counts[key] += 1
        if record.final != doc.label:
            truncated = bool(processed and record.doc_id in processed and processed[record.doc_id].truncated)
            error_rows.append({
                'doc_id': doc.id,
                'gold': doc.label,
                'pred': record.final,
                'kind': key.upper(),
                'topic': doc.topic,
                'truncated': str(truncated).lower(),
                'votes_pos': sum(record.votes),
                'n_votes': len(record.votes),
                'text': doc.text[:snippet_chars],
            })

    csv_path = os.path.join(out_dir, 'errors.csv')
    md_path = os.path.join(out_dir, 'errors.md')
    columns = ['doc_id', 'gold', 'pred', 'kind', 'topic', 'truncated', 'votes_pos', 'n_votes', 'text']
    pd.DataFrame(error_rows, columns=columns).to_csv(csv_path, index=False, encoding='utf-8')

    topic_rows = [[topic, c['tp'], c['fp'], c['fn'], c['tn']] for topic, c in
                  sorted(topic_counts.items(), key=lambda kv: (-sum(kv[1].values()), kv[0]))]
    with open(md_path, 'w', encoding='utf-8') as f:
        f.write("# Error analysis\n\n")
        f.write(markdown_table(['topic', 'TP', 'FP', 'FN', 'TN'], topic_rows))
        f.write(f"\n误分类文档 {len(error_rows)} 条\n\n")
        if error_rows:
            f.write(markdown_table(['doc_id', 'kind', 'topic', 'truncated', 'votes'],
                                   [[r['doc_id'], r['kind'], r['topic'], r['truncated'],
                                     f"{r['votes_pos']}/{r['n_votes']}"] for r in error_rows]))
    logger.info(f"错误分析: {len(error_rows)} 条误分类，已写入 {csv_path}")
    return [csv_path, md_path]
