"""Layer benchmark: wall time, multiply counts and error vs the direct oracle.

A config is a JSON list of layers (or an object with a ``layers`` list)::

    [{"name": "conv3_1", "c": 16, "h": 16, "k": 16, "pad": 1, "seed": 42}]

Missing fields default to ``n=1``, ``w=h``, ``pad=1``, ``bits_w=bits_i=8``,
``granularity="position"`` and ``seed=0``. Wall times are reported, never
asserted; only counts and errors are expected to be reproducible.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from lance import lowpgemm
from lance.engines import ConvSpec, LanceConfig, Mode, arithmetic_report, run_engine
from lance.exceptions import InvalidArgumentError
from lance.quant import Granularity

BENCH_ENGINES = ("direct", "winograd", "lance-faithful", "lance-gemm")
DEFAULT_REPEATS = 5

_LAYER_FIELDS = {"name", "n", "c", "h", "w", "k", "pad", "bits_w", "bits_i", "granularity", "seed"}


@dataclass(frozen=True)
class LayerConfig:
    name: str
    spec: ConvSpec
    cfg: LanceConfig
    seed: int = 0

    @classmethod
    def from_dict(cls, raw, index=0):
        if not isinstance(raw, dict):
            raise InvalidArgumentError(f"layer {index} must be an object")
        unknown = set(raw) - _LAYER_FIELDS
        if unknown:
            raise InvalidArgumentError(f"layer {index}: unknown fields {sorted(unknown)}")
        missing = {"c", "h", "k"} - set(raw)
        if missing:
            raise InvalidArgumentError(f"layer {index}: missing fields {sorted(missing)}")
        seed = raw.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise InvalidArgumentError(f"layer {index}: seed must be an unsigned 64-bit integer")
        spec = ConvSpec(
            n=raw.get("n", 1),
            c=raw["c"],
            h=raw["h"],
            w=raw.get("w", raw["h"]),
            k=raw["k"],
            pad=raw.get("pad", 1),
        )
        cfg = LanceConfig(
            bits_w=raw.get("bits_w", 8),
            bits_i=raw.get("bits_i", 8),
            granularity=raw.get("granularity", "position"),
        )
        return cls(str(raw.get("name", f"layer{index}")), spec, cfg, seed)


@dataclass(frozen=True)
class BenchRow:
    layer: str
    engine: str
    n: int
    c: int
    h: int
    w: int
    k: int
    pad: int
    bits_w: int
    bits_i: int
    granularity: str
    threads: int
    repeats: int
    wall_ns: int
    multiplies: int
    direct_multiplies: int
    ratio_vs_direct: float
    waste: bool
    max_abs_err: float
    rel_err: float


def load_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        raw = raw.get("layers")
    if not isinstance(raw, list):
        raise InvalidArgumentError("config must be a list of layers or {\"layers\": [...]}")
    return [LayerConfig.from_dict(layer, i) for i, layer in enumerate(raw)]


def layer_data(layer):
    """Seeded input and filters for ``layer``."""
    rng = np.random.default_rng(layer.seed)
    spec = layer.spec
    x = rng.standard_normal(spec.input_shape).astype(np.float32)
    w = (rng.standard_normal(spec.filter_shape) / np.sqrt(9 * spec.c)).astype(np.float32)
    return x, w


def _engine_cfg(engine, cfg):
    if engine == "lance-gemm":
        gran = cfg.granularity
        if gran is Granularity.PER_TILE:
            gran = Granularity.PER_POSITION
        return LanceConfig(cfg.bits_w, cfg.bits_i, gran, Mode.GEMM)
    if engine == "lance-faithful":
        return cfg
    return None


def time_ns(fn, repeats):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return int(statistics.median(samples))


def bench_layer(layer, repeats=DEFAULT_REPEATS, threads=1):
    x, w = layer_data(layer)
    spec = layer.spec
    reference = run_engine("direct", x, w, pad=spec.pad).astype(np.float64)
    ref_norm = float(np.linalg.norm(reference))
    rows = []
    for engine in BENCH_ENGINES:
        cfg = _engine_cfg(engine, layer.cfg)
        lowpgemm.reset_multiply_counter()
        y = run_engine(engine, x, w, pad=spec.pad, cfg=cfg)
        counted = lowpgemm.multiply_counter()
        report = arithmetic_report(spec, engine)
        if counted != report.multiplies:
            raise AssertionError(
                f"{layer.name}/{engine}: counted {counted} multiplies, formula gives {report.multiplies}"
            )
        wall = time_ns(lambda: run_engine(engine, x, w, pad=spec.pad, cfg=cfg), repeats)
        diff = y.astype(np.float64) - reference
        rows.append(
            BenchRow(
                layer=layer.name,
                engine=engine,
                n=spec.n, c=spec.c, h=spec.h, w=spec.w, k=spec.k, pad=spec.pad,
                bits_w=cfg.bits_w if cfg else 32,
                bits_i=cfg.bits_i if cfg else 32,
                granularity=cfg.granularity.value if cfg else "",
                threads=threads,
                repeats=repeats,
                wall_ns=wall,
                multiplies=counted,
                direct_multiplies=report.direct_multiplies,
                ratio_vs_direct=report.ratio_vs_direct,
                waste=report.waste,
                max_abs_err=float(np.abs(diff).max()),
                rel_err=float(np.linalg.norm(diff) / ref_norm) if ref_norm else float(np.linalg.norm(diff)),
            )
        )
    return rows


def run_bench(layers, repeats=DEFAULT_REPEATS, threads=1):
    if repeats < DEFAULT_REPEATS:
        raise InvalidArgumentError(f"need at least {DEFAULT_REPEATS} timing repeats")
    rows = []
    for layer in layers:
        rows.extend(bench_layer(layer, repeats, threads))
    return rows


def report_paths(out):
    base, ext = os.path.splitext(os.fspath(out))
    if ext.lower() not in (".csv", ".json"):
        base = os.fspath(out)
    return base + ".csv", base + ".json"


def write_report(rows, out, threads=1):
    """Write ``rows`` as CSV and JSON next to ``out``; returns both paths."""
    csv_path, json_path = report_paths(out)
    columns = [f.name for f in fields(BenchRow)]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(row).items()})
    payload = {
        "threads": threads,
        "note": "wall_ns is informational; speedups are not asserted",
        "rows": [asdict(row) for row in rows],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return csv_path, json_path
