from __future__ import annotations

import logging
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, computed_field

from salientbox.config import DEFAULT_STRIDE, DecoderConfig, EncoderConfig
from salientbox.decoder import BoxDecoder
from salientbox.errors import InvalidParameterError
from salientbox.models import SaliencyMap, SubitizingOutput
from salientbox.synth import generate_dataset, oracle_subitizing, render_scene

logger = logging.getLogger(__name__)

# distinct maps cycled through the timed loop
_WORKLOAD_SIZE = 32

# minimum median decodes per second on desktop hardware
THROUGHPUT_BUDGETS: Dict[int, float] = {224: 500.0, 448: 100.0}


class BenchReport(BaseModel):
    profile: int
    iterations: int
    median_us: float
    p99_us: float
    decodes_per_sec: float
    budget_decodes_per_sec: Optional[float] = None

    @computed_field
    @property
    def meets_budget(self) -> bool:
        return self.budget_decodes_per_sec is None or self.decodes_per_sec >= self.budget_decodes_per_sec


def build_workload(profile: int, seed: int = 0, size: int = _WORKLOAD_SIZE) -> List[Tuple[SaliencyMap, SubitizingOutput]]:
    cfg = EncoderConfig.for_profile(profile, stride=DEFAULT_STRIDE)
    scenes = generate_dataset(seed, size, k_range=(1, 3), cfg=cfg)
    return [(render_scene(scene), oracle_subitizing(scene)) for scene in scenes]


def run_bench(
    profile: int = 224,
    iterations: int = 1000,
    seed: int = 0,
    decoder_config: Optional[DecoderConfig] = None,
) -> BenchReport:
    """Single-threaded per-decode latency; map generation stays outside the timed loop."""
    if iterations < 1:
        raise InvalidParameterError(f"iterations must be at least 1, got {iterations}")
    workload = build_workload(profile, seed)
    decoder = BoxDecoder(decoder_config or DecoderConfig.for_profile(profile))
    decoder.detect(*workload[0])

    samples = np.empty(iterations, dtype=np.int64)
    for i in range(iterations):
        saliency, sub = workload[i % len(workload)]
        start = time.perf_counter_ns()
        decoder.detect(saliency, sub)
        samples[i] = time.perf_counter_ns() - start

    latencies_us = samples / 1000.0
    median_us = float(np.median(latencies_us))
    report = BenchReport(
        profile=profile,
        iterations=iterations,
        median_us=median_us,
        p99_us=float(np.percentile(latencies_us, 99)),
        decodes_per_sec=1e6 / median_us if median_us > 0 else float("inf"),
        budget_decodes_per_sec=THROUGHPUT_BUDGETS.get(profile),
    )
    logger.info("bench profile %d: median %.1f us, p99 %.1f us", profile, report.median_us, report.p99_us)
    if not report.meets_budget:
        logger.warning(
            "bench profile %d: %.0f decodes/s is below the %.0f decodes/s budget",
            profile,
            report.decodes_per_sec,
            report.budget_decodes_per_sec,
        )
    return report
