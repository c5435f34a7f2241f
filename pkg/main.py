"""
ADR 小样本跨语言分类工具包主入口
每个子命令对应流水线中的一步；退出码 0 成功、2 配置错误、3 数据错误、4 任务失败
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

# 加载.env文件中的环境变量
load_dotenv()
os.environ.setdefault('CREWAI_TELEMETRY_OPT_OUT', 'true')
os.environ.setdefault('OTEL_SDK_DISABLED', 'true')

# 添加src目录到路径
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from pydantic import ValidationError

from src.experiment_system import ExperimentSystem
from src.tools.corpus_tools import compute_stats, load_corpus
from src.tools.lexicon_tools import RuleName, apply_rule, corrected_labels, load_lexicon
from src.tools.metrics_tools import confusion_by_id, report
from src.tools.reporting_tools import (
    plot_histograms, read_labels_csv, write_corrected_csv, write_flip_log, write_report, write_stats,
)
from src.tools.sampling_tools import FewShotMode, FewShotSpec
from src.utils.config_loader import ScenarioConfig, load_experiment_config
from src.utils.errors import AlignmentError, ConfigError, ToolkitError
from src.utils.log_utils import setup_logging

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = os.path.join('config', 'experiment.yaml')


def build_system(args) -> ExperimentSystem:
    """读取配置、配置运行目录日志并创建实验系统"""
    config = load_experiment_config(args.config)
    run_dir = config.experiment.run_dir
    setup_logging(args.log_level, os.path.join(run_dir, 'log.txt'))
    return ExperimentSystem(config, config_path=args.config)


def cmd_ingest(args) -> int:
    system = build_system(args)
    outputs = system.ingest()
    print(f"✅ 语料已写入: {', '.join(outputs)}")
    return 0


def cmd_stats(args) -> int:
    if args.corpus:
        setup_logging(args.log_level)
        corpus = load_corpus(args.corpus, format=args.format)
        stats = compute_stats(corpus)
        out_dir = args.out or os.path.join('reports', 'stats')
        outputs = write_stats(stats, out_dir, name=corpus.name)
        if args.plot:
            outputs.append(plot_histograms(stats, os.path.join(out_dir, 'histogram.png'), title=corpus.name))
        print(f"📊 {corpus.name}: {stats.n_total} 条 (正例 {stats.n_pos}, 负例 {stats.n_neg}, {stats.ratio_text})")
    else:
        system = build_system(args)
        outputs = system.stats(plots=True if args.plot else None)
    print(f"📄 统计结果: {', '.join(outputs)}")
    return 0


def cmd_split(args) -> int:
    system = build_system(args)
    data = system.prepare()
    print(f"✅ 目标语言 train/dev {len(data.target_train_dev)} (正例 {data.target_train_dev.n_pos})，"
          f"test {len(data.target_test)} (正例 {data.target_test.n_pos})")
    if data.source_train is not None:
        print(f"✅ 源语言 train {len(data.source_train)}，dev {len(data.source_dev)}，test {len(data.source_test)}")
    return 0


def cmd_sample(args) -> int:
    system = build_system(args)
    spec = FewShotSpec(mode=FewShotMode(args.mode), shots=args.shots, n_neg=args.n_neg,
                       n_source=args.n_source, sampling_seed=args.seed)
    sets = system.sample(spec, out_dir=args.out)
    print(f"✅ {spec.label} (种子 {spec.sampling_seed}): train {len(sets.train)}，dev {len(sets.dev)}")
    print(f"   train 组成: {sets.composition('train')}")
    print(f"   dev 组成: {sets.composition('dev')}")
    return 0


def cmd_train_source(args) -> int:
    system = build_system(args)
    models = system.train_source(args.backend)
    print(f"✅ 第一阶段 {args.backend}: {len(models)} 个模型 (种子 {sorted(models)})")
    return 0


def _print_summary(system: ExperimentSystem):
    print("\n📊 场景结果 (F1_1 / F1_m / AUC):")
    for name, result in system.results.items():
        mean = result.aggregate.mean_report
        print(f"  - {name}: {mean.f1_1:.2f} / {mean.f1_macro:.2f} / {mean.auc:.2f}")
    print(f"\n📄 报告目录: {system.layout.reports_dir()}")


def cmd_run(args) -> int:
    system = build_system(args)
    if args.no_flow:
        system.run(args.scenario)
    else:
        try:
            from src.flows.experiment_flow import run_experiment_flow
        except ImportError:
            logger.warning("未安装 crewai，直接执行流水线")
            system.run(args.scenario)
        else:
            run_experiment_flow(system, args.scenario)
    _print_summary(system)
    return 0


def cmd_zero_shot(args) -> int:
    system = build_system(args)
    scenarios = [s for s in system.config.scenarios if s.kind == 'zero_shot' and s.backend == args.backend]
    if not scenarios:
        scenarios = [ScenarioConfig(name=f"zero_shot_{args.backend}", kind='zero_shot', backend=args.backend)]
    for scenario in scenarios:
        system.run_scenario(scenario)
    system.write_reports()
    _print_summary(system)
    return 0


def _gold_labels(path: str, fmt: str):
    gold = load_corpus(path, format=fmt)
    return gold, {doc.id: doc.label for doc in gold}


def cmd_evaluate(args) -> int:
    setup_logging(args.log_level)
    preds = read_labels_csv(args.predictions)
    _, gold = _gold_labels(args.gold, args.format)
    result = report(confusion_by_id(preds, gold))
    out_dir = args.out or os.path.dirname(os.path.abspath(args.predictions))
    csv_path, md_path = write_report(result, out_dir, title=args.title)
    print(f"✅ F1_1={result.f1_1:.2f} F1_m={result.f1_macro:.2f} AUC={result.auc:.2f}")
    print(f"📄 报告: {csv_path}, {md_path}")
    return 0


def cmd_postprocess(args) -> int:
    setup_logging(args.log_level)
    if not args.docs and not args.gold:
        raise ConfigError("postprocess 需要 --docs（文档文本）或 --gold（金标准语料）")
    preds = read_labels_csv(args.preds)
    docs = load_corpus(args.docs or args.gold, format=args.format)
    rule = RuleName.parse(args.rule)
    lexicon = load_lexicon(args.lexicon)
    outcomes = apply_rule(rule, docs.by_id(), preds, lexicon)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.preds))
    corrected_path = write_corrected_csv(outcomes, os.path.join(out_dir, f"corrected_{rule.short}.csv"))
    audit_path = write_flip_log(outcomes, os.path.join(out_dir, f"flips_{rule.short}.csv"))
    flips = [o for o in outcomes if o.flipped]
    for outcome in flips:
        logger.info(f"改判 {outcome.doc_id}: {outcome.original} -> {outcome.corrected}"
                    f"（{rule.value}，词条 {outcome.matched_term or '-'}）")
    print(f"✅ 规则 {rule.value} 改判 {len(flips)}/{len(outcomes)} 条")
    print(f"📄 结果: {corrected_path}")
    print(f"📄 改判记录: {audit_path}")

    if args.gold:
        _, gold = _gold_labels(args.gold, args.format)
        if set(preds) != set(gold):
            raise AlignmentError(f"预测文件 {args.preds} 与金标准 {args.gold} 的文档ID不一致")
        result = report(confusion_by_id(corrected_labels(outcomes), gold))
        write_report(result, os.path.join(out_dir, f"report_{rule.short}"), title=f"+{rule.short}")
        print(f"📊 F1_1={result.f1_1:.2f} F1_m={result.f1_macro:.2f}")
    return 0


def cmd_report(args) -> int:
    system = build_system(args)
    outputs = system.rebuild_reports()
    _print_summary(system)
    print(f"📄 共写出 {len(outputs)} 个文件")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='ADR 小样本跨语言分类工具包')
    parser.add_argument('--log-level', default=None, help='日志级别 (默认读取 ADR_LOG_LEVEL 或 INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument('--config', '-c', default=DEFAULT_CONFIG, help='实验配置文件 (YAML)')
        return p

    p = with_config(sub.add_parser('ingest', help='读取或生成语料'))
    p.set_defaults(func=cmd_ingest)

    p = with_config(sub.add_parser('stats', help='语料统计'))
    p.add_argument('corpus', nargs='?', help='单独统计一个语料文件；省略时统计配置中的语料')
    p.add_argument('--format', default='jsonl', choices=['jsonl', 'csv'])
    p.add_argument('--out', help='输出目录')
    p.add_argument('--plot', action='store_true', help='绘制长度直方图')
    p.set_defaults(func=cmd_stats)

    p = with_config(sub.add_parser('split', help='分层划分并预处理'))
    p.set_defaults(func=cmd_split)

    p = with_config(sub.add_parser('sample', help='构建小样本集合并写出采样清单'))
    p.add_argument('--mode', required=True, choices=[m.value for m in FewShotMode])
    p.add_argument('--shots', type=int, required=True)
    p.add_argument('--n-neg', type=int, default=0)
    p.add_argument('--n-source', type=int, default=0)
    p.add_argument('--seed', type=int, default=1)
    p.add_argument('--out', help='采样清单目录')
    p.set_defaults(func=cmd_sample)

    p = with_config(sub.add_parser('train-source', help='第一阶段源语言训练'))
    p.add_argument('--backend', default='stub')
    p.set_defaults(func=cmd_train_source)

    p = with_config(sub.add_parser('run', help='执行完整实验'))
    p.add_argument('--scenario', action='append', help='只执行指定场景，可重复')
    p.add_argument('--no-flow', action='store_true', help='不使用 Flow 编排')
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser('zero-shot', help='零样本场景'))
    p.add_argument('--backend', default='stub')
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser('evaluate', help='根据预测文件与金标准计算指标')
    p.add_argument('predictions', help='预测文件 (doc_id,label) 或投票文件 (doc_id,...,final)')
    p.add_argument('gold', help='金标准语料')
    p.add_argument('--format', default='jsonl', choices=['jsonl', 'csv'])
    p.add_argument('--out', help='输出目录')
    p.add_argument('--title', default='report')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('postprocess', help='应用词表后处理规则')
    p.add_argument('--rule', required=True, help='med / wh')
    p.add_argument('--lexicon', required=True, help='词表文件')
    p.add_argument('--preds', required=True, help='预测文件 (doc_id,label) 或投票文件 (doc_id,...,final)')
    p.add_argument('--docs', help='提供文档原文的语料；省略时使用 --gold')
    p.add_argument('--gold', help='金标准语料，给出时同时计算后处理后的指标')
    p.add_argument('--format', default='jsonl', choices=['jsonl', 'csv'])
    p.add_argument('--out', help='输出目录')
    p.set_defaults(func=cmd_postprocess)

    p = with_config(sub.add_parser('report', help='根据运行目录重建报告'))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回进程退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        print(f"\n❌ 配置错误: {e}")
        return e.exit_code
    except ToolkitError as e:
        logger.error(f"{args.command} 失败: {e}")
        print(f"\n❌ {args.command} 失败: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"参数校验失败: {e}")
        print(f"\n❌ 参数校验失败: {e}")
        return ConfigError.exit_code
    except KeyboardInterrupt:
        print("\n⚠️  用户中断")
        return 4
    except Exception as e:
        logger.exception(f"{args.command} 异常: {e}")
        print(f"\n❌ {args.command} 异常: {e}")
        return 4


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
