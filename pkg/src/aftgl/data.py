"""Dataset containers, validation, CSV ingestion, and group-wise orthonormalization.

A dataset holds one row per subject: a delayed-entry time ``c0`` (left
truncation), an observation interval ``[cL, cU]`` for the event time
(``cL == cU`` encodes an exactly observed time, ``cU = inf`` right
censoring), a block of penalized covariates ``X`` partitioned into groups,
and a block of unpenalized covariates ``Z``.

Model fitting operates on a group-orthonormalized version of ``X``: each
group's columns are mean-centered and replaced by the Q factor of their QR
decomposition.  Coefficients estimated on that basis are mapped back to the
original column scale with :func:`back_transform`.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


class DataError(ValueError):
    """Raised when a file or dataset violates the documented schema."""


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the p penalized columns into K non-empty groups.

    Parameters
    ----------
    membership : ndarray of int, shape (p,)
        Group index (0-based) of each column of X.  Groups need not be
        contiguous column blocks.

    Notes
    -----
    The per-group weight matrix convention is fixed to ``G_k = m_k * I``,
    so group sizes are the only weight information carried here.
    """

    membership: np.ndarray

    def __post_init__(self):
        memb = np.asarray(self.membership, dtype=np.intp).ravel()
        if memb.size:
            K = int(memb.max()) + 1
            if memb.min() < 0:
                raise DataError("group indices must be non-negative")
            sizes = np.bincount(memb, minlength=K)
            if np.any(sizes == 0):
                empty = np.flatnonzero(sizes == 0)
                raise DataError(f"empty group index {empty[0]}: groups must partition the columns")
        object.__setattr__(self, "membership", memb)

    @property
    def p(self) -> int:
        return self.membership.size

    @property
    def K(self) -> int:
        return int(self.membership.max()) + 1 if self.membership.size else 0

    @property
    def sizes(self) -> np.ndarray:
        """m_k for k = 0..K-1."""
        return np.bincount(self.membership, minlength=self.K)

    def indices(self, k: int) -> np.ndarray:
        """Column indices belonging to group k."""
        return np.flatnonzero(self.membership == k)

    @staticmethod
    def from_labels(labels) -> "GroupStructure":
        """Build from arbitrary labels, numbering groups by first appearance."""
        seen = {}
        memb = np.empty(len(labels), dtype=np.intp)
        for j, lab in enumerate(labels):
            if lab not in seen:
                seen[lab] = len(seen)
            memb[j] = seen[lab]
        return GroupStructure(memb)

    @staticmethod
    def singletons(p: int) -> "GroupStructure":
        """One group per column (ordinary, ungrouped shrinkage)."""
        return GroupStructure(np.arange(p, dtype=np.intp))


@dataclass(frozen=True)
class SurvivalDataset:
    """Left-truncated, interval-censored sample with grouped covariates.

    ``entry[i] <= lower[i] <= upper[i]`` with ``lower > 0``; ``upper`` may be
    ``inf`` (right censoring) and ``lower == upper`` marks an exact time.
    """

    entry: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    groups: GroupStructure
    x_names: tuple = ()
    z_names: tuple = ()

    def __post_init__(self):
        for name in ("entry", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Z = np.asarray(self.Z, dtype=float)
        if Z.size == 0:
            Z = np.zeros((X.shape[0], 0))
        Z = np.atleast_2d(Z)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x_{j + 1}" for j in range(X.shape[1])))
        if not self.z_names:
            object.__setattr__(self, "z_names", tuple(f"z_{j + 1}" for j in range(Z.shape[1])))
        n = self.entry.size
        if not (self.lower.size == self.upper.size == n and X.shape[0] == Z.shape[0] == n):
            raise DataError("entry, lower, upper, X, Z must agree on the number of rows")
        if self.groups.p != X.shape[1]:
            raise DataError(
                f"group structure covers {self.groups.p} columns but X has {X.shape[1]}"
            )
        report = validate_dataset(self)
        if not report.ok:
            raise DataError(str(report))

    @property
    def n(self) -> int:
        return self.entry.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class ValidationIssue:
    rule: str
    rows: tuple
    detail: str = ""

    def __str__(self):
        where = ", ".join(str(r) for r in self.rows[:8])
        if len(self.rows) > 8:
            where += ", ..."
        msg = f"{self.rule}: rows [{where}]"
        return msg + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def __str__(self):
        if self.ok:
            return "dataset valid"
        return "dataset invalid: " + "; ".join(str(v) for v in self.issues)


def validate_dataset(d) -> ValidationReport:
    """Check every dataset invariant, reporting offending row indices.

    Pure function: never mutates or raises on invalid data.  Row indices are
    0-based positions in the arrays (add 2 for the line of a CSV with header).
    """
    issues = []

    def check(mask, rule, detail=""):
        bad = np.flatnonzero(mask)
        if bad.size:
            issues.append(ValidationIssue(rule, tuple(int(i) for i in bad), detail))

    entry, lower, upper = d.entry, d.lower, d.upper
    with np.errstate(invalid="ignore"):
        check(~np.isfinite(entry), "entry_finite", "c0 must be a finite number")
        check(np.isnan(lower) | (lower == np.inf), "lower_finite", "cL must be finite")
        check(np.isnan(upper), "upper_not_nan", "cU must be a number or +inf")
        check(entry < 0, "entry_nonnegative", "c0 >= 0")
        check(lower <= 0, "lower_positive", "cL > 0 (log of event times is taken)")
        check(entry > lower, "entry_before_lower", "c0 <= cL")
        check(lower > upper, "interval_ordered", "cL <= cU")
    bad_x = ~np.isfinite(d.X)
    if bad_x.any():
        rows, cols = np.nonzero(bad_x)
        names = [d.x_names[c] if c < len(d.x_names) else f"x_{c + 1}" for c in cols[:8]]
        issues.append(
            ValidationIssue("finite_X", tuple(int(r) for r in rows), "columns " + ", ".join(names))
        )
    bad_z = ~np.isfinite(d.Z)
    if bad_z.any():
        rows, cols = np.nonzero(bad_z)
        names = [d.z_names[c] if c < len(d.z_names) else f"z_{c + 1}" for c in cols[:8]]
        issues.append(
            ValidationIssue("finite_Z", tuple(int(r) for r in rows), "columns " + ", ".join(names))
        )
    return ValidationReport(tuple(issues))


def _parse_time(token: str, row_num: int, col: str, allow_inf: bool) -> float:
    tok = token.strip()
    if tok == "" or tok.lower() in ("inf", "+inf", "infinity"):
        if allow_inf:
            return np.inf
        raise DataError(f"row {row_num}: column {col} must be a finite number, got {token!r}")
    try:
        return float(tok)
    except ValueError:
        raise DataError(f"row {row_num}: cannot parse {col} value {token!r}") from None


def load_dataset(data_file, group_file) -> SurvivalDataset:
    """Read a dataset CSV plus a group CSV into a validated SurvivalDataset.

    The data file must have header columns ``c0,cL,cU`` followed by covariate
    columns.  Covariates named in the group file (header ``column,group``)
    form X, in data-file column order; all remaining covariate columns form
    Z.  An empty or ``inf`` token in ``cU`` marks right censoring.  Group
    labels are arbitrary strings, numbered in order of first appearance.
    """
    with open(group_file, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip().lower() for c in rows[0][:2]] != ["column", "group"]:
        raise DataError(f"{group_file}: expected header 'column,group'")
    group_of = {}
    for num, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise DataError(f"{group_file}: row {num} needs both column and group")
        name = row[0].strip()
        if name in group_of:
            raise DataError(f"{group_file}: column {name!r} listed twice")
        group_of[name] = row[1].strip()
    if not group_of:
        raise DataError(f"{group_file}: no group assignments found")

    with open(data_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataError(f"{data_file}: empty file") from None
        if header[:3] != ["c0", "cL", "cU"]:
            raise DataError(f"{data_file}: header must start with c0,cL,cU, got {header[:3]}")
        covariates = header[3:]
        missing = [c for c in group_of if c not in covariates]
        if missing:
            raise DataError(f"{group_file}: unknown column(s) {', '.join(sorted(missing))}")
        x_names = [c for c in covariates if c in group_of]
        z_names = [c for c in covariates if c not in group_of]
        entry, lower, upper, rows_cov = [], [], [], []
        for num, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{data_file}: row {num} has {len(row)} fields, header has {len(header)}"
                )
            entry.append(_parse_time(row[0], num, "c0", allow_inf=False))
            lower.append(_parse_time(row[1], num, "cL", allow_inf=False))
            upper.append(_parse_time(row[2], num, "cU", allow_inf=True))
            rows_cov.append([_parse_time(v, num, header[3 + j], allow_inf=False)
                             for j, v in enumerate(row[3:])])
    if not entry:
        raise DataError(f"{data_file}: no data rows")
    cov = np.asarray(rows_cov, dtype=float)
    x_idx = [covariates.index(c) for c in x_names]
    z_idx = [covariates.index(c) for c in z_names]
    groups = GroupStructure.from_labels([group_of[c] for c in x_names])
    return SurvivalDataset(
        entry=np.asarray(entry),
        lower=np.asarray(lower),
        upper=np.asarray(upper),
        X=cov[:, x_idx],
        Z=cov[:, z_idx] if z_idx else np.zeros((cov.shape[0], 0)),
        groups=groups,
        x_names=tuple(x_names),
        z_names=tuple(z_names),
    )


@dataclass(frozen=True)
class OrthonormalBasis:
    """Group-wise QR factorization of the centered X matrix.

    ``Q[:, idx_k] @ R[k]`` reconstructs the centered columns of group k, and
    ``Q[:, idx_k].T @ Q[:, idx_k]`` is the identity.  R factors carry a
    positive diagonal (signs are fixed after the raw decomposition), so the
    map is deterministic and invertible.
    """

    Q: np.ndarray
    R: tuple
    centers: np.ndarray
    groups: GroupStructure = field(repr=False)


def group_orthonormalize(X, groups: GroupStructure) -> OrthonormalBasis:
    """Center each column of X and orthonormalize columns within each group.

    Raises if any group is rank deficient after centering (diagonal of R
    within 1e-8 of zero relative to the column norm) or has more columns
    than there are rows.  No pivoting: column order is preserved exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    if groups.p != p:
        raise DataError(f"group structure covers {groups.p} columns but X has {p}")
    max_m = int(groups.sizes.max()) if groups.K else 0
    if n <= max_m:
        raise DataError(f"need more rows ({n}) than the largest group size ({max_m})")
    centers = X.mean(axis=0)
    Xc = X - centers
    Q = np.empty_like(Xc)
    Rs = []
    for k in range(groups.K):
        idx = groups.indices(k)
        Qk, Rk = np.linalg.qr(Xc[:, idx], mode="reduced")
        # fix signs so the diagonal of R is positive
        signs = np.sign(np.diag(Rk))
        signs[signs == 0] = 1.0
        Qk = Qk * signs
        Rk = Rk * signs[:, None]
        col_norms = np.linalg.norm(Xc[:, idx], axis=0)
        tiny = np.abs(np.diag(Rk)) <= 1e-8 * np.maximum(col_norms, 1e-300)
        if tiny.any():
            j = idx[np.flatnonzero(tiny)[0]]
            raise DataError(
                f"group {k} is rank deficient after centering (column {j}); "
                "remove collinear or constant columns"
            )
        Q[:, idx] = Qk
        Rs.append(Rk)
    return OrthonormalBasis(Q=Q, R=tuple(Rs), centers=centers, groups=groups)


def back_transform(beta_ortho, basis: OrthonormalBasis):
    """Map coefficients on the orthonormal basis back to original columns.

    Solves ``R_k b_k = beta_k`` per group so the fitted values agree:
    ``Q beta_ortho == X_centered @ back_transform(beta_ortho)``.  Accepts a
    single p-vector or an (S, p) array of posterior draws, applied row-wise.
    """
    b = np.asarray(beta_ortho, dtype=float)
    squeeze = b.ndim == 1
    b = np.atleast_2d(b)
    if b.shape[1] != basis.groups.p:
        raise DataError(f"expected {basis.groups.p} coefficients, got {b.shape[1]}")
    out = np.empty_like(b)
    for k in range(basis.groups.K):
        idx = basis.groups.indices(k)
        out[:, idx] = solve_triangular(basis.R[k], b[:, idx].T, lower=False).T
    return out[0] if squeeze else out


def standardize_columns(M):
    """Center to zero mean, scale to unit variance (n-1 divisor).

    Returns the transformed matrix together with the column means and
    standard deviations needed to restore the original scale.  Constant
    columns are rejected.  A zero-column matrix passes through untouched.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 0:
        return M.copy(), np.zeros(0), np.ones(0)
    means = M.mean(axis=0)
    sds = M.std(axis=0, ddof=1)
    bad = ~np.isfinite(sds) | (sds <= 0)
    if bad.any():
        raise DataError(f"constant or non-finite column at index {int(np.flatnonzero(bad)[0])}")
    return (M - means) / sds, means, sds
