"""
运行目录布局与清单
runs/<场景>/<采样种子>/model_<模型种子>/ 下保存检查点、预测与完成标记
"""
import hashlib
import json
import logging
import os
import shutil
from datetime import datetime
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

DONE_MARKER = "DONE"
MANIFEST_FILE = "manifest.json"
CONFIG_SNAPSHOT = "config.yaml"


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def config_hash(config_path: str) -> str:
    """配置文件原始字节的 sha256"""
    with open(config_path, 'rb') as f:
        return sha256_bytes(f.read())


class RunLayout:
    """运行目录中各产物的路径"""

    def __init__(self, root: str):
        self.root = os.path.abspath(root)

    def path(self, *parts: str) -> str:
        return os.path.join(self.root, *parts)

    @property
    def data_dir(self) -> str:
        return self.path('data')

    @property
    def log_file(self) -> str:
        return self.path('log.txt')

    def stage1_dir(self, backend: str, model_seed: int) -> str:
        return self.path('stage1', backend, f"model_{model_seed}")

    def scenario_dir(self, scenario: str) -> str:
        return self.path('runs', scenario)

    def seed_dir(self, scenario: str, sampling_seed: int) -> str:
        return self.path('runs', scenario, str(sampling_seed))

    def model_dir(self, scenario: str, sampling_seed: int, model_seed: int) -> str:
        return self.path('runs', scenario, str(sampling_seed), f"model_{model_seed}")

    def reports_dir(self) -> str:
        return self.path('reports')

    def ensure(self) -> 'RunLayout':
        os.makedirs(self.root, exist_ok=True)
        return self


def is_done(directory: str) -> bool:
    return os.path.exists(os.path.join(directory, DONE_MARKER))


def mark_done(directory: str, info: Optional[Dict[str, Any]] = None):
    """写入完成标记；标记存在时该任务在重跑时被跳过"""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, DONE_MARKER), 'w', encoding='utf-8') as f:
        json.dump(info or {}, f, ensure_ascii=False, sort_keys=True)


def snapshot_config(config_path: str, run_dir: str) -> str:
    """把配置文件按原字节复制到运行目录，返回其哈希"""
    os.makedirs(run_dir, exist_ok=True)
    target = os.path.join(run_dir, CONFIG_SNAPSHOT)
    if os.path.abspath(config_path) != os.path.abspath(target):
        shutil.copyfile(config_path, target)
    digest = config_hash(config_path)
    logger.debug(f"配置快照已写入 {target} (sha256 {digest[:12]})")
    return digest


class RunManifest:
    """
    运行清单

    每次命令执行追加一条记录：命令、配置哈希、种子与产出文件（相对运行目录）。
    """

    def __init__(self, run_dir: str):
        self.run_dir = os.path.abspath(run_dir)
        self.path = os.path.join(self.run_dir, MANIFEST_FILE)
        self.entries: List[Dict[str, Any]] = []
        if os.path.exists(self.path):
            with open(self.path, 'r', encoding='utf-8') as f:
                self.entries = json.load(f).get('entries', [])

    def record(self, command: str, config_hash: Optional[str] = None, seeds: Optional[Dict[str, Any]] = None,
               outputs: Optional[List[str]] = None, status: str = "success", **extra) -> Dict[str, Any]:
        entry = {
            'command': command,
            'config_hash': config_hash,
            'seeds': seeds or {},
            'outputs': sorted(os.path.relpath(p, self.run_dir) for p in (outputs or [])),
            'status': status,
            'timestamp': datetime.now().isoformat(timespec='seconds'),
        }
        entry.update(extra)
        self.entries.append(entry)
        self.save()
        return entry

    def save(self) -> str:
        os.makedirs(self.run_dir, exist_ok=True)
        with open(self.path, 'w', encoding='utf-8') as f:
            json.dump({'entries': self.entries}, f, ensure_ascii=False, indent=2)
        return self.path

    def producer_of(self, output_path: str) -> Optional[Dict[str, Any]]:
        """查找产出某文件的最近一条记录"""
        relative = os.path.relpath(os.path.abspath(output_path), self.run_dir)
        for entry in reversed(self.entries):
            if relative in entry.get('outputs', []):
                return entry
        return None
