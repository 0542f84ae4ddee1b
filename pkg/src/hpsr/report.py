"""Tabular rate-distortion reports.

RdPoint rows become a pandas DataFrame with a fixed column set, and from
there the sweep CSV.
"""

import logging
from pathlib import Path
from typing import IO, Sequence

import pandas as pd

from .metrics import RdPoint, bd_rate

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["rate_id", "bpp", "base_bits", "prior_bits", "d1_psnr", "d2_psnr"]


def rd_frame(points: Sequence[RdPoint]) -> pd.DataFrame:
    """DataFrame of RD points with exactly the CSV columns, in input order.

    Examples:
        >>> rd_frame([RdPoint(bpp=1.5, d1_psnr=60.0, rate_id="hpsr-r00")]).columns.tolist()
        ['rate_id', 'bpp', 'base_bits', 'prior_bits', 'd1_psnr', 'd2_psnr']
    """
    for point in points:
        if not isinstance(point, RdPoint):
            raise TypeError(f"Expected RdPoint, got {type(point)}")
    frame = pd.DataFrame(
        {
            "rate_id": [p.rate_id for p in points],
            "bpp": [float(p.bpp) for p in points],
            "base_bits": [int(p.base_bits) for p in points],
            "prior_bits": [int(p.prior_bits) for p in points],
            "d1_psnr": [float(p.d1_psnr) for p in points],
            "d2_psnr": [float(p.d2_psnr) for p in points],
        },
        columns=CSV_COLUMNS,
    )
    return frame.astype({"base_bits": "int64", "prior_bits": "int64"})


def write_csv(points: Sequence[RdPoint], target: str | Path | IO[str] | None = None) -> str | None:
    """Write RD points as CSV; returns the text when ``target`` is None.

    Infinite PSNR is written as ``inf`` and a missing D2 as ``nan``.
    """
    return rd_frame(points).to_csv(target, index=False, na_rep="nan", float_format="%.6f")


def bd_summary(
    anchor: Sequence[RdPoint],
    test: Sequence[RdPoint],
    with_d2: bool = False,
    anchor_name: str = "naive",
    test_name: str = "hpsr",
) -> dict:
    """BD-rate of ``test`` against ``anchor`` for D1 (and D2 when evaluated)."""
    summary = {"anchor": anchor_name, "test": test_name, "bd_rate_d1": bd_rate(anchor, test, "d1")}
    if with_d2:
        summary["bd_rate_d2"] = bd_rate(anchor, test, "d2")
    logger.info("BD-rate %s", summary)
    return summary
