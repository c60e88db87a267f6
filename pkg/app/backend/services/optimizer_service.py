"""
Design-adaptive block-product groups.

Indices are split by how their leverage ``b_i`` and squared centred residual
``c_i`` sit relative to their means, the split is rebalanced so every part has
a small residual sum, and each part is cut into blocks. Uniform shuffles
within the blocks form the group.
"""

import logging
from math import ceil, floor, sqrt
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.backend.core.config import settings
from app.backend.core.exceptions import DegenerateResidual, InvalidInput
from app.backend.core.linalg import (
    as_matrix,
    as_vector,
    extend_basis,
    leverage_norms,
    orthonormal_basis,
    project,
    residual,
)
from app.backend.models.permutation import BlockGroup, Perm
from app.backend.schemas.optimizer import DesignProfile, OptimizerReport, PartitionPlan
from app.backend.services.permutations import apply_rows, sample_block
from app.backend.utils.rng import stream

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], Perm]

# relative slack under which b_i - b_bar and c_i - c_bar count as zero
CLASSIFY_SLACK = 1e-12


def compute_profile(x: ArrayLike, z: ArrayLike) -> DesignProfile:
    """
    Residual ``v = (I - H^Z) X`` and the derived per-index quantities.

    Raises
    ------
    InvalidInput
        On dimension mismatch.
    """
    zm = as_matrix(z, "z")
    xv = as_vector(x, "x", zm.shape[0])
    basis = orthonormal_basis(zm)
    v = residual(basis, xv)
    v_bar = float(v.mean())
    a = v - v_bar
    b = leverage_norms(zm)
    c = a * a
    v_star = v_bar * project(basis, np.ones(v.shape[0]))
    hx = project(basis, xv)
    return DesignProfile(
        v=v,
        v_bar=v_bar,
        a=a,
        b=b,
        c=c,
        b_bar=float(b.mean()),
        c_bar=float(c.mean()),
        M=float(c.max()),
        S=float(c.sum()),
        v_star_sq=float(v_star @ v_star),
        x_norm_sq=float(xv @ xv),
        hx_norm_sq=float(hx @ hx),
        basis=basis,
    )


def classify(profile: DesignProfile) -> tuple[list[int], list[int], list[int]]:
    """
    ``I2 = {c < c_bar, b > b_bar}``, ``I3 = {c > c_bar, b < b_bar}``, ``I1`` the rest.
    """
    db = profile.b - profile.b_bar
    dc = profile.c - profile.c_bar
    db[np.abs(db) <= CLASSIFY_SLACK] = 0.0
    dc[np.abs(dc) <= CLASSIFY_SLACK * max(profile.c_bar, np.finfo(float).tiny)] = 0.0
    in2 = (dc < 0) & (db > 0)
    in3 = (dc > 0) & (db < 0)
    in1 = ~(in2 | in3)
    return (
        np.flatnonzero(in1).tolist(),
        np.flatnonzero(in2).tolist(),
        np.flatnonzero(in3).tolist(),
    )


def balanced_subset(indices: list[int], a: NDArray, limit: float) -> list[int]:
    """
    Grow a subset with ``|sum a| <= limit`` smallest magnitudes first, leaning
    against the running sum, until no remaining element fits.
    """
    pos = sorted((i for i in indices if a[i] >= 0), key=lambda i: abs(a[i]))
    neg = sorted((i for i in indices if a[i] < 0), key=lambda i: abs(a[i]))
    chosen: list[int] = []
    total = 0.0
    pi = ni = 0
    while pi < len(pos) or ni < len(neg):
        heads = []
        if pi < len(pos):
            heads.append(("pos", pos[pi]))
        if ni < len(neg):
            heads.append(("neg", neg[ni]))
        # against the running sum first; on a zero sum the smaller magnitude first
        if total > 0:
            heads.sort(key=lambda h: h[0] != "neg")
        elif total < 0:
            heads.sort(key=lambda h: h[0] != "pos")
        else:
            heads.sort(key=lambda h: abs(a[h[1]]))
        for side, i in heads:
            if abs(total + a[i]) <= limit:
                chosen.append(i)
                total += a[i]
                if side == "pos":
                    pi += 1
                else:
                    ni += 1
                break
        else:
            break
    return sorted(chosen)


def remove(pairs: ArrayLike, s_target: float, rng: np.random.Generator | None = None) -> list[int]:
    """
    Pick indices whose ``|b|`` total reaches ``s_target`` while balancing ``a``.

    Each step takes an element from the non-negative ``a`` pool while the
    running sum of ``a`` over the unpicked elements is positive, otherwise
    from the negative pool, falling back to whichever pool is non-empty. It
    stops once ``sum |b| >= s_target``. Picks are uniform with ``rng`` and
    lowest-index first without it.

    Parameters
    ----------
    pairs : array_like
        ``(k, 2)`` array of ``(a_i, b_i)``.
    s_target : float
        Target in ``[0, sum |b_i|]``.

    Returns
    -------
    list of int
        Positions into ``pairs``.

    Raises
    ------
    InvalidInput
        If ``s_target`` is negative or exceeds ``sum |b_i|``.
    """
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    a, b = arr[:, 0], np.abs(arr[:, 1])
    total_b = float(b.sum())
    if s_target < 0 or s_target > total_b * (1 + 1e-12) + 1e-300:
        raise InvalidInput("s_target must lie in [0, sum |b|]", {"s_target": s_target, "sum_b": total_b})

    pools = {True: [i for i in range(len(a)) if a[i] >= 0], False: [i for i in range(len(a)) if a[i] < 0]}
    picked: list[int] = []
    sum_a = float(a.sum())
    sum_b = 0.0
    for _ in range(len(a)):
        pool = pools[sum_a > 0] or pools[not sum_a > 0]
        pos = int(rng.integers(len(pool))) if rng is not None else 0
        i = pool.pop(pos)
        picked.append(i)
        sum_a -= a[i]
        sum_b += b[i]
        if sum_b >= s_target:
            break
    return sorted(picked)


def scale(pairs: ArrayLike, factors: tuple[float, float]) -> NDArray[np.float64]:
    """Centre both components, then multiply them by ``factors``."""
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] == 0:
        return arr.copy()
    centred = arr - arr.mean(axis=0)
    return centred * np.asarray(factors, dtype=np.float64)


def _exponent_size(n: int, exponent: float) -> int:
    return ceil(n**exponent)


def rearrange(
    profile: DesignProfile,
    i1: list[int],
    i2: list[int],
    i3: list[int],
    rng: np.random.Generator | None = None,
    topup_exponent: float | None = None,
    min_block_exponent: float | None = None,
    split_exponent: float | None = None,
) -> tuple[list[int], list[int], list[int], bool]:
    """
    Rebalance ``(I1, I2, I3)`` into ``(J1, J2, J3)``.

    Returns
    -------
    tuple
        ``(j1, j2, j3, collapsed)``; when ``collapsed`` every index is in ``j1``.
    """
    topup_exponent = settings.PERMTEST_TOPUP_EXPONENT if topup_exponent is None else topup_exponent
    min_block_exponent = settings.PERMTEST_MIN_BLOCK_EXPONENT if min_block_exponent is None else min_block_exponent
    split_exponent = settings.PERMTEST_SPLIT_EXPONENT if split_exponent is None else split_exponent

    n = profile.n
    a, c = profile.a, profile.c
    dc = c - profile.c_bar
    big_m = profile.M if profile.M > 0 else 1.0
    root_s = sqrt(profile.S)

    keep2 = balanced_subset(i2, a, root_s)
    keep3 = balanced_subset(i3, a, root_s)
    in_kept = np.zeros(n, dtype=bool)
    in_kept[keep2] = True
    in_kept[keep3] = True
    rest = np.flatnonzero(~in_kept)

    dc_rest = float(dc[rest].sum())
    budget = float(a[rest].sum()) ** 2 + dc_rest**2 / big_m
    j1 = set(rest.tolist())
    if budget > 8 * profile.S:
        source = keep2 if dc_rest > 0 else keep3
        if source:
            pairs = np.column_stack([a[source], dc[source]])
            target = min(abs(dc_rest), float(np.abs(dc[source]).sum()))
            moved = {source[k] for k in remove(pairs, target, rng)}
            j1 |= moved
            if source is keep2:
                keep2 = [i for i in keep2 if i not in moved]
            else:
                keep3 = [i for i in keep3 if i not in moved]
        logger.debug(f"rearrange budget {budget:.4g} > 8S; moved elements into J1")

    if len(j1) < _exponent_size(n, topup_exponent):
        floor_size = _exponent_size(n, min_block_exponent)
        while len(j1) < floor_size and (keep2 or keep3):
            a2, a3 = a[keep2].sum(), a[keep3].sum()
            c2, c3 = dc[keep2].sum(), dc[keep3].sum()
            best, best_score = None, np.inf
            for group_id, members in ((2, keep2), (3, keep3)):
                for i in members:
                    s2 = (a2 - a[i]) ** 2 + (c2 - dc[i]) ** 2 / big_m if group_id == 2 else a2**2 + c2**2 / big_m
                    s3 = (a3 - a[i]) ** 2 + (c3 - dc[i]) ** 2 / big_m if group_id == 3 else a3**2 + c3**2 / big_m
                    if s2 + s3 < best_score:
                        best, best_score = (group_id, i), s2 + s3
            group_id, i = best
            (keep2 if group_id == 2 else keep3).remove(i)
            j1.add(i)

    split = _exponent_size(n, split_exponent)
    if len(keep2) < split or len(keep3) < split:
        logger.info(f"J2/J3 sizes ({len(keep2)}, {len(keep3)}) below {split}; using a single index set")
        return list(range(n)), [], [], True
    return sorted(j1), sorted(keep2), sorted(keep3), False


def partition_set(pairs: ArrayLike, m_param: float) -> list[list[int]]:
    """
    Cut an ordered stream of centred pairs into blocks of mass at least ``m_param``.

    The stream starts at the heaviest pair. While the running sum ``u`` has
    ``||u||^2`` at most the total mass, the next pair is the heaviest left;
    otherwise it is the one minimizing ``u . p + ||p||^2``, which shrinks
    ``||u||`` when the pairs sum to zero. Blocks are then cut greedily and a
    light final block is merged into its predecessor.

    Returns
    -------
    list of list of int
        Blocks of positions into ``pairs``, in stream order.
    """
    if m_param <= 0:
        raise InvalidInput("m_param must be positive", {"m_param": m_param})
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    k = arr.shape[0]
    if k == 0:
        return []
    mass = np.einsum("ij,ij->i", arr, arr)
    total = float(mass.sum())

    left = np.ones(k, dtype=bool)
    order = [int(np.argmax(mass))]
    left[order[0]] = False
    u = arr[order[0]].copy()
    for _ in range(k - 1):
        cand = np.flatnonzero(left)
        if u @ u <= total:
            nxt = cand[np.argmax(mass[cand])]
        else:
            nxt = cand[np.argmin(arr[cand] @ u + mass[cand])]
        order.append(int(nxt))
        left[nxt] = False
        u += arr[nxt]

    blocks: list[list[int]] = []
    current: list[int] = []
    acc = 0.0
    for i in order:
        current.append(i)
        acc += mass[i]
        if acc >= m_param:
            blocks.append(current)
            current, acc = [], 0.0
    if current:
        if blocks:
            blocks[-1].extend(current)
        else:
            blocks.append(current)
    return blocks


def partition_random(
    indices: list[int],
    n_total: int,
    epsilon: float,
    rng: np.random.Generator,
) -> list[list[int]]:
    """
    Assign ``indices`` uniformly to ``N = floor(k / n^(1/2 + epsilon))`` bins.

    ``N = 0`` gives one block with every index; empty bins are dropped.
    """
    if not 0 < epsilon < 0.5:
        raise InvalidInput("epsilon must lie in (0, 0.5)", {"epsilon": epsilon})
    k = len(indices)
    if k == 0:
        return []
    bins = floor(k / n_total ** (0.5 + epsilon))
    if bins <= 1:
        return [list(indices)]
    idx = np.asarray(indices)
    assign = rng.integers(bins, size=k)
    return [idx[assign == j].tolist() for j in range(bins) if np.any(assign == j)]


def build_optimized_group(
    x: ArrayLike,
    z: ArrayLike,
    mode: str = "contract",
    rng: np.random.Generator | None = None,
    epsilon: float | None = None,
) -> tuple[BlockGroup, PartitionPlan]:
    """
    Profile, classify, rearrange and partition each index set into blocks.

    Parameters
    ----------
    x, z : array_like
        Tested covariate and nuisance design.
    mode : {"contract", "random"}
        Deterministic stream partition or random bins.
    rng : numpy.random.Generator, optional
        Source for the random choices; defaults to the ``partition`` stream of
        the configured seed.

    Returns
    -------
    tuple of (BlockGroup, PartitionPlan)

    Raises
    ------
    DegenerateResidual
        If ``X`` lies in the span of ``Z``.
    """
    if mode not in ("contract", "random"):
        raise InvalidInput("mode must be 'contract' or 'random'", {"mode": mode})
    profile = compute_profile(x, z)
    if profile.S <= 1e-12 * max(profile.x_norm_sq, np.finfo(float).tiny):
        raise DegenerateResidual("X lies in the column span of Z", {"S": profile.S, "x_norm_sq": profile.x_norm_sq})
    rng = stream(settings.PERMTEST_SEED, "partition") if rng is None else rng
    eps = settings.PERMTEST_PARTITION_EPSILON if epsilon is None else epsilon

    i1, i2, i3 = classify(profile)
    j1, j2, j3, collapsed = rearrange(profile, i1, i2, i3, rng=rng)
    m_param = profile.M ** (1 / 3) * profile.S ** (2 / 3)

    blocks: list[list[int]] = []
    for members in (j1, j2, j3):
        if not members:
            continue
        if mode == "contract":
            pairs = scale(np.column_stack([profile.a[members], profile.c[members]]), (1.0, 1.0 / sqrt(profile.M)))
            blocks += [[members[i] for i in block] for block in partition_set(pairs, m_param)]
        else:
            blocks += partition_random(members, profile.n, eps, rng)

    blocks = [sorted(block) for block in blocks]
    group = BlockGroup(n=profile.n, blocks=tuple(tuple(block) for block in blocks))
    plan = PartitionPlan(j1=j1, j2=j2, j3=j3, blocks=blocks, m_param=m_param, mode=mode, collapsed=collapsed)
    logger.info(f"optimized group: {len(blocks)} blocks, |J1|={len(j1)} |J2|={len(j2)} |J3|={len(j3)}")
    return group, plan


def approx_objective(plan: PartitionPlan, profile: DesignProfile) -> float:
    """``n v_bar^2 / 2 + sum_i mean_{S_i}(c) * sum_{S_i}(b) + ||v_bar H^Z 1||^2``."""
    block_term = sum(float(profile.c[block].mean() * profile.b[block].sum()) for block in plan.blocks if block)
    return 0.5 * profile.n * profile.v_bar**2 + block_term + profile.v_star_sq


def empirical_upper_quantile(values: ArrayLike, t: float) -> float:
    """Smallest sample value ``lam`` with ``mean(values > lam) <= t``."""
    q = np.sort(np.asarray(values, dtype=np.float64))
    m = q.shape[0]
    exceed = m - np.searchsorted(q, q, side="right")
    ok = exceed <= t * m + 1e-9
    return float(q[int(np.argmax(ok))])


def lambda2_values(x: ArrayLike, z: ArrayLike, perms: list[Perm]) -> NDArray[np.float64]:
    """``q = v_pi . v / 2 + ||H^{Z_pi} v||^2`` per permutation."""
    zm = as_matrix(z, "z")
    xv = as_vector(x, "x", zm.shape[0])
    basis = orthonormal_basis(zm)
    v = residual(basis, xv)
    out = np.empty(len(perms))
    for k, perm in enumerate(perms):
        # ||H^{Z_pi} v|| = ||H^Z P_pi^T v|| and P_pi^T v = v[pi]
        proj = basis.basis.T @ v[perm.array]
        out[k] = 0.5 * (apply_rows(perm, v) @ v) + proj @ proj
    return out


def lambda1_values(x: ArrayLike, z: ArrayLike, perms: list[Perm]) -> NDArray[np.float64]:
    """``X^T H X + X_pi^T (I - H) X`` with ``H`` the projector onto ``[Z, Z_pi]``."""
    zm = as_matrix(z, "z")
    xv = as_vector(x, "x", zm.shape[0])
    base = orthonormal_basis(zm)
    out = np.empty(len(perms))
    for k, perm in enumerate(perms):
        joint = extend_basis(base, apply_rows(perm, zm))
        hx = project(joint, xv)
        out[k] = xv @ hx + apply_rows(perm, xv) @ (xv - hx)
    return out


def _check_sampling(t: float, m: int) -> None:
    if m < 1:
        raise InvalidInput("m must be at least 1", {"m": m})
    if not 0 < t < 1:
        raise InvalidInput("t must lie in (0, 1)", {"t": t})


def lambda2_sampled(x: ArrayLike, z: ArrayLike, sampler: Sampler, t: float, m: int, rng: np.random.Generator) -> float:
    _check_sampling(t, m)
    perms = [sampler(rng) for _ in range(m)]
    return empirical_upper_quantile(lambda2_values(x, z, perms), t)


def lambda1_sampled(x: ArrayLike, z: ArrayLike, sampler: Sampler, t: float, m: int, rng: np.random.Generator) -> float:
    _check_sampling(t, m)
    perms = [sampler(rng) for _ in range(m)]
    return empirical_upper_quantile(lambda1_values(x, z, perms), t)


def gap_terms(plan: PartitionPlan, profile: DesignProfile) -> tuple[float, float]:
    """``|J|(mean_J b - b_bar)(mean_J c - c_bar)`` for ``J2`` and ``J3``; zero for empty sets."""
    terms = []
    for members in (plan.j2, plan.j3):
        if not members:
            terms.append(0.0)
            continue
        terms.append(
            len(members)
            * (float(profile.b[members].mean()) - profile.b_bar)
            * (float(profile.c[members].mean()) - profile.c_bar)
        )
    return terms[0], terms[1]


def compare_groups(
    x: ArrayLike,
    z: ArrayLike,
    alpha: float,
    m: int,
    rng: np.random.Generator,
    mode: str = "contract",
    with_lambda1: bool = True,
) -> tuple[OptimizerReport, BlockGroup, PartitionPlan]:
    """
    Estimate lambda2 for the optimized group at ``alpha/4`` and for uniform
    permutations at ``alpha/2``, plus the plan's gap terms.
    """
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)", {"alpha": alpha})
    if m < ceil(1 / alpha**2):
        logger.warning(f"m={m} samples is below ceil(1/alpha^2)={ceil(1 / alpha**2)}")
    group, plan = build_optimized_group(x, z, mode=mode, rng=rng)
    profile = compute_profile(x, z)
    uniform = BlockGroup.single_block(profile.n)

    opt_perms = [sample_block(group, rng) for _ in range(m)]
    unif_perms = [sample_block(uniform, rng) for _ in range(m)]
    report = OptimizerReport(
        objective_approx=approx_objective(plan, profile),
        lambda2_hat=empirical_upper_quantile(lambda2_values(x, z, opt_perms), alpha / 4),
        lambda2_random_hat=empirical_upper_quantile(lambda2_values(x, z, unif_perms), alpha / 2),
        lambda1_hat=empirical_upper_quantile(lambda1_values(x, z, opt_perms), alpha / 4) if with_lambda1 else None,
        lambda1_random_hat=(
            empirical_upper_quantile(lambda1_values(x, z, unif_perms), alpha / 2) if with_lambda1 else None
        ),
        gap_terms=gap_terms(plan, profile),
        samples_used=m,
        v_norm_sq=float(profile.v @ profile.v),
    )
    return report, group, plan
