"""Weighted proportional-fairness solvers for transmit probabilities.

Two programs are covered. The collector program constrains the total
attempt budget (``sum(tau) <= M``) and has a near-closed-form solution.
The general program carries one neighborhood constraint per link
(``tau_i + sum of conflicting tau_j <= M``) and is solved by dual
decomposition: a multiplier per constraint, projected-gradient inner
maximization of the Lagrangian over the box, diminishing-step multiplier
updates, and a Newton polish on the active set to push the KKT residual
to tolerance.

Both objectives are weighted sums of logarithms of link success
probabilities. They are concave on the box (the Hessian is diagonal and
nonpositive), so any point meeting the KKT conditions is a global
optimum; solvers report the worst KKT violation alongside the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracles import fd_hessian_diag, fd_second_directional

_LO = 1e-14  # interior floor; the log barrier keeps iterates off zero anyway


@dataclass(frozen=True)
class TransmitPolicy:
    """Per-link transmit probabilities plus the channel count they assume."""

    tau: np.ndarray
    channel_count: int

    def __post_init__(self):
        t = np.array(self.tau, dtype=float)
        if t.ndim != 1:
            raise ValueError("tau must be one-dimensional")
        if t.size and (t.min() < -1e-12 or t.max() > 1.0 + 1e-12):
            raise ValueError("tau entries must lie in [0, 1]")
        np.clip(t, 0.0, 1.0, out=t)
        t.flags.writeable = False
        object.__setattr__(self, "tau", t)
        m = int(self.channel_count)
        if m < 1:
            raise ValueError("channel_count must be >= 1")
        object.__setattr__(self, "channel_count", m)

    @property
    def link_count(self) -> int:
        return self.tau.size


@dataclass(frozen=True)
class SolverReport:
    policy: TransmitPolicy
    objective_value: float
    dual_variable: float | None
    kkt_residual: float
    iterations: int
    converged: bool
    degenerate: bool = False


@dataclass(frozen=True)
class ConcavityReport:
    trials: int
    directional_violations: int
    worst_directional: float
    worst_hessian_mismatch: float
    passed: bool


def _as_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be one-dimensional")
    if w.size and w.min() < 0:
        raise ValueError("weights must be nonnegative")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def weights_from_queues(queue_lengths):
    """Map queue lengths to link weights, w = ln(1 + Q).

    Natural logarithm throughout the package; only ratios of weights
    matter to the solved policies. Fractional queue lengths are accepted
    so time-averaged backlogs can drive the weights.
    """
    q = np.asarray(queue_lengths, dtype=float)
    if q.ndim != 1:
        raise ValueError("queue lengths must be one-dimensional")
    if q.size and q.min() < 0:
        raise ValueError("queue lengths must be nonnegative")
    return np.log1p(q)


def _success_probs(conflicts, policy):
    tau = policy.tau
    m = policy.channel_count
    mu = np.empty_like(tau)
    for i in range(tau.size):
        prim = list(conflicts.primary[i])
        sec = list(conflicts.secondary_only[i])
        mu[i] = (tau[i] * np.prod(1.0 - tau[prim])
                 * np.prod(1.0 - tau[sec] / m))
    return mu


def link_success_prob(net, conflicts, policy, link):
    """Success probability of one link under the policy.

    The link's own attempt must occur, every primary conflict must stay
    silent, and every secondary-only conflict must miss the chosen
    channel (each overlaps with probability tau/M).
    """
    s = conflicts.link_count
    if policy.link_count != s or net.link_count != s:
        raise ValueError("policy/conflicts/network dimensions disagree")
    if not 0 <= link < s:
        raise ValueError(f"link index {link} out of range")
    tau = policy.tau
    m = policy.channel_count
    prim = list(conflicts.primary[link])
    sec = list(conflicts.secondary_only[link])
    return float(tau[link] * np.prod(1.0 - tau[prim])
                 * np.prod(1.0 - tau[sec] / m))


def objective(net, conflicts, weights, policy):
    """Weighted log-utility F = sum of w_i * ln(mu_i).

    Zero-weight links contribute nothing even when their success
    probability vanishes. Returns ``-inf`` (a value, not an exception)
    when some positively weighted link has zero success probability.
    """
    w = _as_weights(weights)
    if not (w.size == policy.link_count == conflicts.link_count
            == net.link_count):
        raise ValueError("weights/policy/conflicts dimensions disagree")
    mu = _success_probs(conflicts, policy)
    mask = w > 0
    if not mask.any():
        return 0.0
    if np.any(mu[mask] <= 0.0):
        return float("-inf")
    return float(np.dot(w[mask], np.log(mu[mask])))


def _reverse_weight_sums(conflicts, w):
    # coefficient of ln(1-tau_j) and ln(1-tau_j/M) in the regrouped utility
    s = w.size
    a = np.zeros(s)
    b = np.zeros(s)
    for i in range(s):
        for j in conflicts.primary[i]:
            a[j] += w[i]
        for j in conflicts.secondary_only[i]:
            b[j] += w[i]
    return a, b


def objective_gradient(net, conflicts, weights, policy):
    """Gradient of the log-utility at a strictly interior policy."""
    w = _as_weights(weights)
    if not (w.size == policy.link_count == conflicts.link_count
            == net.link_count):
        raise ValueError("weights/policy/conflicts dimensions disagree")
    tau = policy.tau
    if tau.size and (tau.min() <= 0.0 or tau.max() >= 1.0):
        raise ValueError("gradient requires tau strictly inside (0, 1)")
    m = policy.channel_count
    a, b = _reverse_weight_sums(conflicts, w)
    return w / tau - a / (1.0 - tau) - (b / m) / (1.0 - tau / m)


# --- separable machinery -------------------------------------------------
#
# Regrouping the utility by the link each factor belongs to gives
# F(tau) = sum_j phi_j(tau_j) with
#   phi_j(t) = w_j ln(t) + a_j ln(1-t) + b_j ln(1-t/M),
# an identity that needs no symmetry assumption. All solvers below work
# on (w, a, b, M) in this form.


def _phi_value(t, w, a, b, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w > 0, w * np.log(t), 0.0)
        out = out + np.where(a > 0, a * np.log(1.0 - t), 0.0)
        out = out + np.where(b > 0, b * np.log(1.0 - t / m), 0.0)
    return out


def _phi_grad(t, w, a, b, m):
    # where-guards keep 0/0 out when a zero coefficient meets a boundary t
    with np.errstate(divide="ignore", invalid="ignore"):
        own = np.where(w > 0, w / t, 0.0)
        prim = np.where(a > 0, a / (1.0 - t), 0.0)
        sec = np.where(b > 0, (b / m) / (1.0 - t / m), 0.0)
    return own - prim - sec


def _phi_curv(t, w, a, b, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        own = np.where(w > 0, w / t**2, 0.0)
        prim = np.where(a > 0, a / (1.0 - t) ** 2, 0.0)
        sec = np.where(b > 0, (b / m**2) / (1.0 - t / m) ** 2, 0.0)
    return -(own + prim + sec)


def _stationarity_residual(t, grad, lo, ub):
    at_lo = t <= lo + 1e-12
    at_ub = t >= ub - 1e-12
    r = np.abs(grad)
    r = np.where(at_lo, np.maximum(0.0, grad), r)
    r = np.where(at_ub, np.maximum(0.0, -grad), r)
    return float(r.max()) if r.size else 0.0


def _box_maximize(w, a, b, m, c, lo, ub, start, tol=1e-9, max_iter=500):
    """Maximize sum(phi_j(t_j)) - c.t over the box.

    Projected gradient ascent with a backtracking (Armijo) line search.
    The ascent direction is curvature-scaled, which for this separable
    objective makes each accepted step a safeguarded Newton step per
    coordinate; the line search keeps it monotone.
    """
    t = np.clip(start, lo, ub)
    fval = float(_phi_value(t, w, a, b, m).sum() - c @ t)
    resid = np.inf
    for _ in range(max_iter):
        grad = _phi_grad(t, w, a, b, m) - c
        resid = _stationarity_residual(t, grad, lo, ub)
        if resid <= tol:
            break
        direction = grad / np.maximum(-_phi_curv(t, w, a, b, m), 1e-12)
        step = 1.0
        accepted = False
        while step >= 1e-18:
            t_new = np.clip(t + step * direction, lo, ub)
            f_new = float(_phi_value(t_new, w, a, b, m).sum() - c @ t_new)
            gain = grad @ (t_new - t)
            if math.isfinite(f_new) and f_new >= fval + 1e-4 * gain:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        t, fval = t_new, f_new
    return t, resid


def _coordinate_argmax(w, a, b, m, c, lo, ub, iters=70):
    """Exact per-coordinate maximizer of phi_j(t) - c_j t on the box.

    phi' is strictly decreasing, so plain vectorized bisection on
    phi'(t) = c suffices; bound cases are resolved by the gradient sign
    at the endpoints.
    """
    lo_arr = np.full_like(c, lo, dtype=float)
    hi_arr = np.asarray(ub, dtype=float) * np.ones_like(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_hi = _phi_grad(hi_arr, w, a, b, m) - c
        done_hi = g_hi >= 0.0  # still ascending at the upper bound
        lo_b = lo_arr.copy()
        hi_b = hi_arr.copy()
        for _ in range(iters):
            mid = 0.5 * (lo_b + hi_b)
            g = _phi_grad(mid, w, a, b, m) - c
            take_hi = g > 0.0
            lo_b = np.where(take_hi, mid, lo_b)
            hi_b = np.where(take_hi, hi_b, mid)
    t = 0.5 * (lo_b + hi_b)
    return np.where(done_hi, hi_arr, t)


# --- collector (budget-constrained) solver --------------------------------


def _collector_mu(tau, m):
    mu = np.empty_like(tau)
    for i in range(tau.size):
        mu[i] = tau[i] * np.prod(1.0 - np.delete(tau, i) / m)
    return mu


def _collector_kkt(w, tau, m, gamma):
    """Worst violation across stationarity, feasibility, slackness."""
    total_w = w.sum()
    viol = [max(0.0, float(tau.sum() - m)),
            abs(gamma) * abs(float(tau.sum() - m)),
            max(0.0, -gamma)]
    for i in range(w.size):
        rest = total_w - w[i]
        if m - tau[i] > 0:
            pressure = rest / (m - tau[i])
        else:
            pressure = 0.0 if rest == 0 else math.inf
        if w[i] == 0.0:
            # held at zero; the Lagrangian derivative must not push down
            viol.append(max(0.0, -(pressure + gamma)))
            continue
        d = -w[i] / tau[i] + pressure + gamma
        if tau[i] >= 1.0 - 1e-12:
            viol.append(max(0.0, d))
        else:
            viol.append(abs(d))
    return float(max(viol))


def _collector_clamped_solve(w, m, clamped, tol, max_iters):
    """Dual loop for the collector program once some entries pin at 1.

    Free entries keep the full interference pressure of the clamped ones
    (their coefficient on ln(1-t/M) counts every other weight), and the
    attempt budget shrinks by one per clamped entry.
    """
    total_w = w.sum()
    free = ~clamped
    wf = w[free]
    if wf.size == 0:
        return np.ones_like(w), 0.0, 1, True
    bf = total_w - wf
    budget = m - int(clamped.sum())
    if budget <= 0:
        raise ValueError("no attempt budget left for unclamped links")
    zeros = np.zeros_like(wf)
    t = np.minimum(m * wf / total_w, 1.0 - 1e-9)
    gamma = 0.0
    iterations = 0
    converged = False
    for k in range(1, max_iters + 1):
        iterations = k
        t, resid = _box_maximize(wf, zeros, bf, m, np.full_like(wf, gamma),
                                 _LO, 1.0, t)
        gap = float(t.sum() - budget)
        if resid <= tol and gap <= tol and abs(gamma * gap) <= tol:
            converged = True
            break
        gamma = max(0.0, gamma + (0.1 / math.sqrt(k)) * gap)
    out = np.ones_like(w)
    out[free] = t
    return out, gamma, iterations, converged


def solve_star(weights, channel_count, *, tol=1e-6, max_iters=10**5):
    """Maximize the collector log-utility subject to sum(tau) <= M.

    Fast path: the stationary point tau_i = M*w_i/W meets the budget with
    equality and a zero multiplier; it is returned whenever it respects
    the box. Otherwise the violating entries clamp to 1 and the free ones
    are re-solved numerically on the reduced budget. Zero-weight links
    are excluded up front and transmit never.
    """
    w = _as_weights(weights)
    m = int(channel_count)
    if m < 1:
        raise ValueError("channel_count must be >= 1")
    tau = np.zeros(w.size)
    active = w > 0
    if not active.any():
        return SolverReport(TransmitPolicy(tau, m), 0.0, 0.0, 0.0, 0,
                            converged=True, degenerate=True)
    wa = w[active]
    raw = m * wa / wa.sum()
    if raw.max() <= 1.0:
        ta = raw
        gamma = 0.0
        iterations = 1
        inner_ok = True
    else:
        ta, gamma, iterations, inner_ok = _collector_clamped_solve(
            wa, m, raw >= 1.0, tol=tol, max_iters=max_iters)
    tau[active] = ta
    mu = _collector_mu(tau, m)
    value = float(np.dot(wa, np.log(mu[active])))
    kkt = _collector_kkt(w, tau, m, gamma)
    return SolverReport(TransmitPolicy(tau, m), value, gamma, kkt,
                        iterations, converged=inner_ok and kkt <= tol)


def _collector_tau_of_gamma(w, m, gamma):
    """Per-coordinate stationary point of the collector Lagrangian.

    For gamma > 0 the stationarity condition is the quadratic
    gamma*t^2 - (gamma*M + W)*t + w*M = 0; the smaller root is the one
    inside (0, M) (the larger root is checked to lie at or beyond M, so
    outside the box) and is evaluated in the cancellation-free form.
    """
    total_w = w.sum()
    if gamma == 0.0:
        root = m * w / total_w
    else:
        s = gamma * m + total_w
        disc = s * s - 4.0 * gamma * w * m
        sq = np.sqrt(disc)
        root = 2.0 * w * m / (s + sq)
        larger = (s + sq) / (2.0 * gamma)
        if larger.size and larger.min() < m - 1e-9:
            raise AssertionError("larger quadratic root fell inside [0, M]")
    return np.minimum(root, 1.0)


def star_dual_function(weights, channel_count, gamma):
    """Dual of the collector program at multiplier gamma.

    Minimizes the Lagrangian over the box by per-coordinate stationarity
    with clamping and returns its value; concave in gamma, maximized at
    the optimal multiplier.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    w = _as_weights(weights)
    m = int(channel_count)
    active = w > 0
    if not active.any():
        return 0.0
    wa = w[active]
    total_w = wa.sum()
    t = _collector_tau_of_gamma(wa, m, float(gamma))
    rest = total_w - wa
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(rest > 0, rest * np.log1p(-t / m), 0.0)
    value = -(wa * np.log(t)) - cross + gamma * t
    return float(value.sum() - gamma * m)


# --- general (neighborhood-constrained) solver -----------------------------


def _general_kkt(t, lam, g, grad_lagrangian, lo, ub):
    stat = _stationarity_residual(t, grad_lagrangian, lo, ub)
    feas = max(0.0, float(g.max())) if g.size else 0.0
    slack = float(np.abs(lam * g).max()) if g.size else 0.0
    return max(stat, feas, slack)


def _newton_polish(sub, lam, tol, rounds=50):
    """Drive the multipliers to complementarity on the active set.

    Inner solutions are exact per-coordinate argmaxes; the Jacobian of
    the constraint gaps with respect to the active-set multipliers is
    N diag(1/phi'') N^T restricted to coordinates off their bounds.
    """
    wa, aa, ba, m, n_act, lo, ub = sub
    lam = lam.copy()
    best = None
    for _ in range(rounds):
        c = n_act.T @ lam
        t = _coordinate_argmax(wa, aa, ba, m, c, lo, ub)
        g = n_act @ t - m
        grad = _phi_grad(t, wa, aa, ba, m) - c
        kkt = _general_kkt(t, lam, g, grad, lo, ub)
        if best is None or kkt < best[2]:
            best = (t.copy(), lam.copy(), kkt)
        if kkt <= tol:
            break
        rows = np.nonzero((lam > 0.0) | (g > -10.0 * tol))[0]
        if rows.size == 0:
            break
        free = (t > lo + 1e-12) & (t < ub - 1e-12)
        dtdc = np.zeros_like(t)
        curv = _phi_curv(t, wa, aa, ba, m)
        dtdc[free] = 1.0 / curv[free]
        na = n_act[rows]
        jac = (na * dtdc) @ na.T - 1e-13 * np.eye(rows.size)
        try:
            delta = np.linalg.solve(jac, g[rows])
        except np.linalg.LinAlgError:
            break
        lam[rows] = np.maximum(0.0, lam[rows] - delta)
    return best


def solve_general(net, conflicts, weights, channel_count=None, *,
                  tol_feas=1e-6, tol_stat=1e-6, max_iters=10**5):
    """Maximize the log-utility under per-link neighborhood constraints.

    Dual subgradient outer loop (one multiplier per link constraint,
    diminishing steps 0.1/sqrt(k)) around projected-gradient inner
    maximization of the Lagrangian over the box. A Newton polish on the
    active set runs periodically to reach tight KKT residuals. The
    program is concave, so a converged report certifies global
    optimality up to the stated residual. Non-convergence is reported
    through the flag, never raised.

    Zero-weight links are excluded from the variables (they never
    transmit) but their constraint rows still bind their neighborhoods.
    """
    w = _as_weights(weights)
    m = int(net.channel_count if channel_count is None else channel_count)
    s = net.link_count
    if not (w.size == s == conflicts.link_count):
        raise ValueError("weights/conflicts/network dimensions disagree")
    if m < 1:
        raise ValueError("channel_count must be >= 1")
    a, b = _reverse_weight_sums(conflicts, w)
    active = np.nonzero(w > 0)[0]
    if active.size == 0:
        return SolverReport(TransmitPolicy(np.zeros(s), m), 0.0, None,
                            0.0, 0, converged=True, degenerate=True)

    n_mat = np.eye(s)
    for i in range(s):
        for j in conflicts.primary[i] | conflicts.secondary_only[i]:
            n_mat[i, j] = 1.0
    # zero-weight coordinates stay at zero, so only the active columns
    # of the constraint matrix matter; every row is kept
    n_act = n_mat[:, active]
    wa, aa, ba = w[active], a[active], b[active]
    lo = np.full(active.size, _LO)
    ub = np.where(aa > 0, 1.0 - 1e-12, 1.0)
    sub = (wa, aa, ba, m, n_act, lo, ub)

    tol = min(tol_feas, tol_stat)
    lam = np.zeros(s)
    t = _coordinate_argmax(wa, aa, ba, m, np.zeros(active.size), lo, ub)
    best = None
    iterations = 0
    for k in range(1, max_iters + 1):
        iterations = k
        c = n_act.T @ lam
        t, _ = _box_maximize(wa, aa, ba, m, c, lo, ub, t)
        g = n_act @ t - m
        grad = _phi_grad(t, wa, aa, ba, m) - c
        kkt = _general_kkt(t, lam, g, grad, lo, ub)
        if best is None or kkt < best[2]:
            best = (t.copy(), lam.copy(), kkt)
        if kkt <= tol:
            break
        if k % 25 == 0 or k == 1:
            polished = _newton_polish(sub, lam, tol)
            if polished is not None and polished[2] < best[2]:
                best = polished
            if polished is not None and polished[2] <= tol:
                break
        lam = np.maximum(0.0, lam + (0.1 / math.sqrt(k)) * g)
    t_best, lam_best, kkt_best = best
    tau = np.zeros(s)
    tau[active] = t_best
    value = float(_phi_value(t_best, wa, aa, ba, m).sum())
    policy = TransmitPolicy(np.clip(tau, 0.0, 1.0), m)
    return SolverReport(policy, value, None, float(kkt_best),
                        iterations, converged=kkt_best <= tol)


# --- concavity self-test ----------------------------------------------------


def concavity_selftest(net, conflicts, weights, trials, seed=0):
    """Empirical check that the log-utility is concave on the interior.

    Draws random interior policies and directions, requires every second
    directional difference to stay below 1e-8, and compares the analytic
    per-link log-rate Hessian diagonal (own coordinate -1/t^2, primary
    conflicts -1/(1-t)^2, secondary-only -(1/M^2)/(1-t/M)^2, zero
    elsewhere) against finite differences.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    w = _as_weights(weights)
    s = net.link_count
    m = net.channel_count
    rng = np.random.default_rng(seed)
    violations = 0
    worst_dir = -math.inf
    worst_mismatch = 0.0

    def f_of(tau):
        return objective(net, conflicts, w, TransmitPolicy(tau, m))

    for _ in range(trials):
        tau = rng.uniform(0.05, 0.95, size=s)
        d = rng.normal(size=s)
        d /= np.linalg.norm(d)
        val = fd_second_directional(f_of, tau, d)
        worst_dir = max(worst_dir, val)
        if val > 1e-8:
            violations += 1

        link = int(rng.integers(0, s))

        def rate(tv, _i=link):
            pol = TransmitPolicy(tv, m)
            return math.log(link_success_prob(net, conflicts, pol, _i))

        analytic = np.zeros(s)
        analytic[link] = -1.0 / tau[link] ** 2
        for j in conflicts.primary[link]:
            analytic[j] = -1.0 / (1.0 - tau[j]) ** 2
        for j in conflicts.secondary_only[link]:
            analytic[j] = -(1.0 / m**2) / (1.0 - tau[j] / m) ** 2
        fd = fd_hessian_diag(rate, tau)
        mismatch = np.max(np.abs(fd - analytic)
                          / np.maximum(1.0, np.abs(analytic)))
        worst_mismatch = max(worst_mismatch, float(mismatch))

    return ConcavityReport(
        trials=trials,
        directional_violations=violations,
        worst_directional=float(worst_dir),
        worst_hessian_mismatch=worst_mismatch,
        passed=(violations == 0 and worst_mismatch <= 1e-4),
    )
