import math
from io import StringIO
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

SEED_GOLDEN = 0x9E3779B97F4A7C15
SEED_MODULUS = 2 ** 64
CSV_FLOAT_FORMAT = "%.17g"


def format_real(value: Optional[float]) -> str:
    """Format a real with 17 significant digits; None and NaN become empty."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return CSV_FLOAT_FORMAT % value


def format_short(value: Optional[float]) -> str:
    """Six significant digits for the text report."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6g}"


def format_flag(flag: Optional[bool]) -> str:
    """CSV boolean: true / false, empty when undefined."""
    if flag is None:
        return ""
    return "true" if flag else "false"


def get_verdict_label(sound: Optional[bool]) -> str:
    """Label for a soundness verdict in the text report."""
    labels = {
        True: "sound",
        False: "VIOLATED",
        None: "no verdict",
    }
    return labels.get(sound, "no verdict")


def derive_seed(seed: int, index: int) -> int:
    """seed XOR (index * golden) mod 2^64; index 0 keeps the seed."""
    return (int(seed) ^ ((int(index) * SEED_GOLDEN) % SEED_MODULUS)) % SEED_MODULUS


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) % SEED_MODULUS))


def box_muller_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals from pairs of uniform doubles (cos and sin branches)."""
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1]
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:count].reshape(shape)


def export_data_to_csv(data: Sequence[Dict], columns: List[str]) -> str:
    """Render rows as CSV with a fixed column order; no rows gives the header alone."""
    df = pd.DataFrame(list(data), columns=columns)
    buffer = StringIO()
    df.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return buffer.getvalue()


def calculate_summary(verdicts: Iterable[Optional[bool]]) -> Dict[str, int]:
    """Counts of grades with a satisfied hypothesis, sound verdicts and violations."""
    summary = {"checked": 0, "hypothesis_ok": 0, "sound": 0, "violations": 0}
    for sound in verdicts:
        summary["checked"] += 1
        if sound is None:
            continue
        summary["hypothesis_ok"] += 1
        if sound:
            summary["sound"] += 1
        else:
            summary["violations"] += 1
    return summary
