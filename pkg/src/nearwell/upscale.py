"""From fine radial member records to well-index training data.

The target is the flow-based well index ``q / (p_well - p_i)`` where ``p_i``
is the fine pressure at the coarse cell's equivalent radius. Inputs are
upscaled to a square coarse cell centred on the well: pressure is read at
the equivalent radius, saturation is an overlap-weighted average.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from nearwell import grid, wells

FEATURES = {
    "h2o": ("p", "k", "h", "r_e"),
    "co2_2d": ("p", "expert", "v_tot"),
    "co2_3d": ("p_u", "p", "p_l", "s_g_u", "s_g", "s_g_l", "k_u", "k", "k_l", "v_tot", "r_e", "expert"),
}
TARGET_TRANSFORM = {"h2o": "identity", "co2_2d": "log10", "co2_3d": "log10"}
PROVENANCE = ("member", "time", "cell_size", "layer")


class DatasetError(ValueError):
    """No usable samples could be extracted."""


@dataclass(frozen=True)
class FeatureSpec:
    family: str
    names: tuple
    target_transform: str = "identity"

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate feature names in {self.names}")
        if self.target_transform not in ("identity", "log10"):
            raise ValueError(f"unknown target transform {self.target_transform!r}")

    @classmethod
    def for_family(cls, family: str) -> "FeatureSpec":
        return cls(family, FEATURES[family], TARGET_TRANSFORM[family])

    @property
    def n_features(self) -> int:
        return len(self.names)

    def transform(self, wi):
        return np.log10(wi) if self.target_transform == "log10" else np.asarray(wi, dtype=float)

    def inverse(self, y):
        return 10.0 ** np.asarray(y) if self.target_transform == "log10" else np.asarray(y, dtype=float)


def data_driven_wi(q, p_well, p_i, eps_dp: float = 100.0):
    """Flow-based well index; NaN where the drawdown is below ``eps_dp`` or the
    index is not positive."""
    q = np.asarray(q, dtype=float)
    dp = np.asarray(p_well, dtype=float) - np.asarray(p_i, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        wi = q / dp
    bad = (np.abs(dp) < eps_dp) | ~(wi > 0) | ~np.isfinite(wi)
    return np.where(bad, np.nan, wi)


def pressure_index(r_centers: np.ndarray, r_e: float) -> int:
    """Ring whose centre radius is closest to ``r_e``; ties go to the inner ring."""
    return int(np.argmin(np.abs(np.asarray(r_centers) - r_e)))


def upscale_pressure(r_centers: np.ndarray, p: np.ndarray, r_e: float, r_w: float | None = None, r_outer: float | None = None):
    """Pressure of the ring closest to ``r_e`` (last axis of ``p`` is radial)."""
    if r_w is not None and r_outer is not None and not r_w < r_e < r_outer:
        raise ValueError(f"r_e={r_e} outside the radial domain ({r_w}, {r_outer})")
    return np.asarray(p)[..., pressure_index(r_centers, r_e)]


def overlap_weights(r_faces: np.ndarray, rect) -> np.ndarray:
    """Normalised annulus/rectangle overlap areas, one per ring."""
    areas = np.array([
        grid.annulus_rect_overlap(r_faces[j], r_faces[j + 1], rect) for j in range(len(r_faces) - 1)
    ])
    areas = np.maximum(areas, 0.0)
    total = areas.sum()
    if total <= 0:
        raise ValueError(f"rectangle {rect} does not overlap the radial grid")
    return areas / total


def upscale_saturation(r_faces: np.ndarray, s: np.ndarray, rect) -> np.ndarray:
    """Overlap-weighted average of ``s`` over the rings cut by ``rect``."""
    return np.asarray(s) @ overlap_weights(r_faces, rect)


def well_cell_rect(cell_size: float) -> tuple[float, float, float, float]:
    half = 0.5 * cell_size
    return (-half, half, -half, half)


def expert_feature(k, h, r_e, r_w):
    """log10 of the geometric well index ``2 pi k h / ln(r_e/r_w)`` (m³)."""
    return math.log10(wells.wi_geometric(k, h, r_e, r_w))


@dataclass
class Dataset:
    spec: FeatureSpec
    x: np.ndarray  # (n, n_features), SI units
    wi: np.ndarray  # (n,), flow-based well index
    member: np.ndarray
    time: np.ndarray
    cell_size: np.ndarray
    layer: np.ndarray

    @property
    def y(self) -> np.ndarray:
        """Training target (transformed well index)."""
        return self.spec.transform(self.wi)

    def __len__(self):
        return self.x.shape[0]

    def subset(self, mask) -> "Dataset":
        return Dataset(self.spec, self.x[mask], self.wi[mask], self.member[mask], self.time[mask],
                       self.cell_size[mask], self.layer[mask])

    @classmethod
    def concat(cls, parts: list["Dataset"]) -> "Dataset":
        return cls(
            parts[0].spec,
            np.concatenate([p.x for p in parts]),
            *(np.concatenate([getattr(p, a) for p in parts]) for a in ("wi", "member", "time", "cell_size", "layer")),
        )


@dataclass
class DropStats:
    total: int = 0
    small_drawdown: int = 0
    failed_members: list = field(default_factory=list)

    @property
    def kept(self) -> int:
        return self.total - self.small_drawdown


def member_samples(rec, spec: FeatureSpec, cell_sizes, eps_dp: float = 100.0) -> tuple[Dataset, int]:
    """All samples of one member; returns the dataset and the number dropped."""
    nt, nz, _ = rec.pressure.shape
    rows, wis, prov = [], [], []
    dropped = 0
    for size in cell_sizes:
        rect = well_cell_rect(size)
        w_sat = overlap_weights(rec.r_faces, rect)
        s_up = rec.saturation @ w_sat  # (nt, nz)
        for layer in range(nz):
            k = rec.k_h[layer]
            h = rec.layer_heights[layer]
            r_e = wells.equivalent_radius(size, size, k, k)
            idx = pressure_index(rec.r_centers, r_e)
            p = rec.pressure[:, :, idx]  # (nt, nz)
            wi = data_driven_wi(rec.q[:, layer], rec.p_well[:, layer], p[:, layer], eps_dp)
            up, lo = layer - 1, layer + 1
            for ti in range(nt):
                if not np.isfinite(wi[ti]):
                    dropped += 1
                    continue
                values = {
                    "p": p[ti, layer],
                    "k": k,
                    "h": h,
                    "r_e": r_e,
                    "v_tot": rec.v_tot[ti],
                    "s_g": s_up[ti, layer],
                    "p_u": p[ti, up] if up >= 0 else p[ti, layer],
                    "p_l": p[ti, lo] if lo < nz else p[ti, layer],
                    "s_g_u": s_up[ti, up] if up >= 0 else 0.0,
                    "s_g_l": s_up[ti, lo] if lo < nz else 0.0,
                    "k_u": rec.k_h[up] if up >= 0 else 0.0,
                    "k_l": rec.k_h[lo] if lo < nz else 0.0,
                }
                if "expert" in spec.names:
                    values["expert"] = expert_feature(k, h, r_e, rec.r_w)
                rows.append([values[n] for n in spec.names])
                wis.append(wi[ti])
                prov.append((rec.member_id, rec.times[ti], size, layer))
    prov = np.array(prov, dtype=float).reshape(-1, 4)
    ds = Dataset(
        spec,
        np.array(rows, dtype=float).reshape(-1, spec.n_features),
        np.array(wis, dtype=float),
        prov[:, 0].astype(int), prov[:, 1], prov[:, 2], prov[:, 3].astype(int),
    )
    return ds, dropped


def split_members(member_ids, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[set, set, set]:
    """Partition member ids into train/validation/test sets."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    ids = np.array(sorted(set(int(i) for i in member_ids)))
    n = ids.size
    perm = np.random.default_rng(seed).permutation(ids)
    n_val = int(round(fractions[1] * n))
    n_test = int(round(fractions[2] * n))
    if n >= 3:
        n_val = max(n_val, 1) if fractions[1] > 0 else 0
        n_test = max(n_test, 1) if fractions[2] > 0 else 0
    n_train = n - n_val - n_test
    return set(perm[:n_train].tolist()), set(perm[n_train:n_train + n_val].tolist()), set(perm[n_train + n_val:].tolist())


def assemble_dataset(records, spec: FeatureSpec, cell_sizes, fractions=(0.8, 0.1, 0.1), seed: int = 0,
                     eps_dp: float = 100.0) -> tuple[Dataset, Dataset, Dataset, DropStats]:
    """Samples for every (member, report time, cell size, layer), split by member."""
    stats = DropStats()
    parts = []
    for rec in records:
        if rec.failed:
            stats.failed_members.append(rec.member_id)
            continue
        ds, dropped = member_samples(rec, spec, cell_sizes, eps_dp)
        stats.total += len(ds) + dropped
        stats.small_drawdown += dropped
        parts.append(ds)
    if not parts or sum(len(p) for p in parts) == 0:
        raise DatasetError(
            f"no samples retained: {stats.small_drawdown} of {stats.total} dropped, "
            f"{len(stats.failed_members)} failed members"
        )
    full = Dataset.concat(parts)
    train_ids, val_ids, test_ids = split_members(full.member, fractions, seed)
    pick = lambda ids: full.subset(np.isin(full.member, sorted(ids)))  # noqa: E731
    return pick(train_ids), pick(val_ids), pick(test_ids), stats


# ---------------------------------------------------------------------------
# delimited text files


def write_dataset(path, ds: Dataset) -> None:
    header = list(ds.spec.names) + ["target", "wi"] + list(PROVENANCE)
    y = ds.y
    with open(path, "w", newline="") as f:
        f.write(f"# family={ds.spec.family} transform={ds.spec.target_transform}\n")
        w = csv.writer(f)
        w.writerow(header)
        for i in range(len(ds)):
            w.writerow(
                [repr(float(v)) for v in ds.x[i]]
                + [repr(float(y[i])), repr(float(ds.wi[i])), int(ds.member[i]), repr(float(ds.time[i])),
                   repr(float(ds.cell_size[i])), int(ds.layer[i])]
            )


def read_dataset(path) -> Dataset:
    with open(path, newline="") as f:
        meta = dict(item.split("=") for item in f.readline().lstrip("#").split())
        reader = csv.reader(f)
        header = next(reader)
        rows = [r for r in reader]
    spec = FeatureSpec(meta["family"], tuple(header[:-6]), meta["transform"])
    if tuple(header[-6:]) != ("target", "wi") + PROVENANCE:
        raise DatasetError(f"{path}: unexpected columns {header}")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    nf = spec.n_features
    return Dataset(spec, data[:, :nf], data[:, nf + 1], data[:, nf + 2].astype(int), data[:, nf + 3],
                   data[:, nf + 4], data[:, nf + 5].astype(int))
