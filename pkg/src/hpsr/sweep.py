"""Rate-distortion sweeps: HPSR against the naive baseline over a rate ladder."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .codec import CodecConfig, decode_stream, encode_cloud, encode_naive
from .geometry import VoxelCloud
from .metrics import DEFAULT_NORMAL_K, NormalField, RdPoint, estimate_normals, evaluate

logger = logging.getLogger(__name__)

DEFAULT_S_LADDER = tuple(
    Fraction(s) for s in ("1/16", "1/8", "1/4", "1/2", "3/4", "7/8")
)


@dataclass(frozen=True, eq=False)
class RateTask:
    """One rung of the ladder, self-contained so it can cross a process boundary."""

    index: int
    cloud: VoxelCloud
    config: CodecConfig
    reference_normals: NormalField | None = None
    normal_k: int = DEFAULT_NORMAL_K


def _score(task: RateTask, reconstruction: VoxelCloud, result, codec: str) -> RdPoint:
    rate_id = f"{codec}-r{task.index:02d}"
    if len(reconstruction) == 0:
        logger.warning("%s: empty reconstruction, PSNR reported as nan", rate_id)
        allocation = result.allocation
        return RdPoint(
            bpp=allocation.bpp(len(task.cloud)),
            d1_psnr=math.nan,
            base_bits=allocation.base_bits,
            prior_bits=allocation.prior_bits,
            header_bits=allocation.header_bits,
            rate_id=rate_id,
        )

    with_d2 = task.reference_normals is not None
    if with_d2 and len(reconstruction) <= task.normal_k:
        logger.warning("%s: %d points are too few for k=%d normals, D2 skipped",
                       rate_id, len(reconstruction), task.normal_k)
        with_d2 = False
    test_normals = estimate_normals(reconstruction, task.normal_k) if with_d2 else None
    return evaluate(
        task.cloud,
        reconstruction,
        task.cloud.bitdepth,
        reference_normals=task.reference_normals if with_d2 else None,
        test_normals=test_normals,
        with_d2=with_d2,
        allocation=result.allocation,
        rate_id=rate_id,
    )


def run_rate_point(task: RateTask) -> tuple[RdPoint, RdPoint]:
    """Encode, decode and evaluate one rate with HPSR and with the naive baseline."""
    hpsr = encode_cloud(task.cloud, task.config)
    decoded = decode_stream(hpsr.stream)
    naive = encode_naive(task.cloud, task.config)
    logger.info("rate %02d (%s): %d / %d reconstructed points (hpsr / naive)",
                task.index, task.config.describe(), len(decoded), len(naive.reconstruction))
    return _score(task, decoded, hpsr, "hpsr"), _score(task, naive.reconstruction, naive, "naive")


def run_sweep(
    cloud: VoxelCloud,
    configs: list[CodecConfig],
    threads: int = 1,
    with_d2: bool = True,
    reference_normals: NormalField | None = None,
    normal_k: int = DEFAULT_NORMAL_K,
) -> tuple[list[RdPoint], list[RdPoint]]:
    """Run every configuration and return (hpsr points, naive points) in ladder order.

    Args:
        cloud: Original cloud.
        configs: One CodecConfig per rate.
        threads: Worker processes; 1 runs in-process.
        with_d2: Also evaluate D2. Reference normals are estimated with
            ``normal_k`` unless given.
        reference_normals: Normals of ``cloud`` in canonical point order.
        normal_k: Neighborhood size for estimated normals.
    """
    if with_d2 and reference_normals is None:
        reference_normals = estimate_normals(cloud, normal_k)
    if not with_d2:
        reference_normals = None

    tasks = [
        RateTask(index=i, cloud=cloud, config=config,
                 reference_normals=reference_normals, normal_k=normal_k)
        for i, config in enumerate(configs)
    ]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            results = list(pool.map(run_rate_point, tasks))
    else:
        results = [run_rate_point(task) for task in tasks]

    return [hpsr for hpsr, _ in results], [naive for _, naive in results]
