"""Gaussian fully-probabilistic controller: performance-index recursions and
the closed-form randomized control law, plus numeric oracles that validate
the closed forms by direct quadrature.

The performance index is -ln gamma(x) = 0.5 x^T M x + 0.5 P x + 0.5 omega on
the shifted, conjugate-paired vectorized state.  One backward step maps the
index coefficients (M_t, P_t, omega_t) to (M_{t-1}, P_{t-1}, omega_{t-1})
through the common kernel K = D^T Gr^-1 D + M_t and the scalar curvature
S = 1/Omega + B^T K B (single control channel, so every matrix inverse in
the recursion collapses to a scalar division).  The optimal randomized
controller is Gaussian with mean v = h/S and variance R = 1/S.

All quadratic forms use the plain transpose (never the conjugate transpose):
on conjugate-paired vectors the results are real, and the imaginary residue
is asserted small and dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DiscreteModel
from .errors import ConvergenceError, CurvatureError, StructureError, ValidationError
from .states import realification, slot_order

REAL_RESIDUE_TOL = 1e-9
STEADY_TOL = 1e-9
STEADY_MAX_ITER = 100_000


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.setflags(write=False)
    return out


def _vectorized_random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Canonically vectorized random Hermitian matrix with O(1) entries."""
    h = rng.random((dim, dim)) + 1j * rng.random((dim, dim))
    h = 0.5 * (h + h.conj().T)
    return np.array([h[nm] for nm in slot_order(dim)], dtype=complex)


@dataclass(frozen=True)
class ControllerConfig:
    """Ideal-distribution parameters of the control problem.

    gr: variance of the ideal measurement distribution (pushes o_t to od).
    g:  variance of the actual measurement distribution (enters only the
        constant term of the index; defaults to gr so those terms vanish).
    omega: variance of the ideal controller distribution (control penalty).
    ur: mean of the ideal controller distribution.
    od: desired measurement mean.
    horizon: number of control steps.
    """

    gr: float
    omega: float
    od: float
    g: float | None = None
    ur: float = 0.0
    horizon: int = 1

    def __post_init__(self):
        if self.g is None:
            object.__setattr__(self, "g", self.gr)
        if self.gr <= 0 or self.g <= 0 or self.omega <= 0:
            raise ValidationError("covariances gr, g, omega must be positive")
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")


@dataclass(frozen=True)
class RiccatiState:
    """Index coefficients (M, P, omega) at one time slice."""

    m: np.ndarray
    p: np.ndarray
    omega: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen(np.asarray(self.m, dtype=complex)))
        object.__setattr__(self, "p", _frozen(np.asarray(self.p, dtype=complex).ravel()))

    @classmethod
    def zero(cls, n2: int, omega: float | None = 0.0) -> "RiccatiState":
        return cls(m=np.zeros((n2, n2), dtype=complex),
                   p=np.zeros(n2, dtype=complex), omega=omega)

    @classmethod
    def random(cls, n2: int, rng: np.random.Generator,
               omega: float | None = 0.0) -> "RiccatiState":
        """Seeded random initialization on the valid manifold.

        A valid index must be real on conjugate-paired states: M has to be a
        sum of outer products of vectorized Hermitian operators and P a
        vectorized Hermitian operator.  Entries are O(1), which matters: the
        random kick is what bootstraps control away from exactly diagonal
        states, where the optimal mean control otherwise vanishes
        identically.
        """
        dim = int(round(np.sqrt(n2)))
        rows = [_vectorized_random_hermitian(dim, rng) for _ in range(n2)]
        m = sum(np.outer(w, w) for w in rows) / n2
        p = _vectorized_random_hermitian(dim, rng)
        return cls(m=0.5 * (m + m.T), p=p, omega=omega)


@dataclass(frozen=True)
class ControlLaw:
    """Gaussian randomized controller N(v, r) for one step."""

    v: float
    r: float


@dataclass(frozen=True)
class ComplexNormalParams:
    """Mean, covariance and pseudo-covariance of a complex normal vector."""

    mean: np.ndarray
    gamma_cov: np.ndarray
    c_rel: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex).ravel()
        gam = np.asarray(self.gamma_cov, dtype=complex)
        crel = np.asarray(self.c_rel, dtype=complex)
        n = mean.size
        if gam.shape != (n, n) or crel.shape != (n, n):
            raise ValidationError("covariance shapes do not match the mean length")
        if np.abs(gam - gam.conj().T).max() > 1e-10:
            raise ValidationError("covariance must be Hermitian")
        if np.linalg.eigvalsh(0.5 * (gam + gam.conj().T)).min() < -1e-10:
            raise ValidationError("covariance must be positive semidefinite")
        diag = np.sqrt(np.maximum(np.diag(gam).real, 0.0))
        bound = np.outer(diag, diag)
        if np.any(np.abs(crel) > bound + 1e-10):
            raise ValidationError("pseudo-covariance violates the Cauchy-Schwarz bound")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "gamma_cov", _frozen(gam))
        object.__setattr__(self, "c_rel", _frozen(crel))
        object.__setattr__(self, "dim", n)

    def c_matrix(self) -> np.ndarray | None:
        """C = C' / (|Gamma'|^2 - |C'|^2); None when the denominator vanishes.

        |.| is the determinant; the squared modulus is used for the (possibly
        complex) determinant of the pseudo-covariance.
        """
        denom = np.linalg.det(self.gamma_cov).real ** 2 \
            - abs(np.linalg.det(self.c_rel)) ** 2
        if abs(denom) < 1e-300:
            return None
        return self.c_rel / denom

    def log_density(self, x: np.ndarray) -> float:
        """Log of the complex normal density at x.

        Degenerate (singular) parameter sets are rejected.
        """
        x = np.asarray(x, dtype=complex).ravel()
        d = x - self.mean
        gam, crel = self.gamma_cov, self.c_rel
        gam_inv = np.linalg.inv(gam)
        schur = gam.conj() - crel.conj().T @ gam_inv @ crel
        denom = np.linalg.det(gam).real ** 2 - abs(np.linalg.det(crel)) ** 2
        if denom <= 0:
            raise ValidationError("degenerate complex normal: |Gamma'|^2 - |C'|^2 <= 0")
        quad = (-0.5 * d.conj() @ gam.conj() @ d
                + 0.5 * d @ crel.conj() @ d
                + 0.5 * d.conj() @ crel @ d.conj()
                - 0.5 * d @ gam @ d.conj())
        if abs(quad.imag) > 1e-9 * max(1.0, abs(quad.real)):
            raise StructureError(f"density exponent has imaginary residue {quad.imag:.3e}")
        log_norm = -self.dim * np.log(np.pi) \
            - 0.5 * (np.log(np.linalg.det(gam).real) + np.log(np.linalg.det(schur).real))
        return float(log_norm + quad.real / denom)


def _real_scalar(value: complex, what: str, scale: float = 1.0) -> float:
    """Drop the imaginary residue of a should-be-real scalar.

    ``scale`` is the magnitude of the terms the value was contracted from:
    rounding leaves residues ~eps * scale even with intact pairing; genuine
    pairing breakage produces residues of order scale itself.
    """
    if abs(value.imag) > REAL_RESIDUE_TOL * max(1.0, scale, abs(value.real)):
        raise StructureError(
            f"{what} has imaginary residue {value.imag:.3e}; conjugate pairing "
            "is broken upstream")
    return float(value.real)


def _contraction_scale(*factors) -> float:
    """Sum of absolute products |a||B||c|...; bounds the rounding floor."""
    out = np.abs(np.asarray(factors[0]))
    for f in factors[1:]:
        out = out @ np.abs(np.asarray(f))
    return float(np.atleast_1d(out).sum())


def _kernel(next_state: RiccatiState, model: DiscreteModel, b: np.ndarray,
            cfg: ControllerConfig):
    """K = D^T Gr^-1 D + M_t and the scalar curvature S = 1/Omega + B^T K B."""
    d = model.measurement_row
    K = np.outer(d, d) / cfg.gr + next_state.m
    b = np.asarray(b, dtype=complex).ravel()
    s = _real_scalar(1.0 / cfg.omega + b @ (K @ b), "control curvature S",
                     scale=_contraction_scale(b, K, b))
    if s <= 0:
        raise CurvatureError(
            f"control curvature S = {s:.3e} is not positive; the ideal "
            "covariances are inconsistent")
    return K, b, s


def riccati_step(next_state: RiccatiState, model: DiscreteModel, b: np.ndarray,
                 cfg: ControllerConfig) -> RiccatiState:
    """One backward step of the index recursion (M_t, P_t) -> (M_{t-1}, P_{t-1}).

    The result is re-symmetrized, M <- (M + M^T)/2; omega is carried
    unchanged (use :func:`omega_step` to advance it).
    """
    K, b, s = _kernel(next_state, model, b, cfg)
    a = model.a
    d = model.measurement_row
    ka = K @ a
    bka = b @ ka                       # row B^T K A
    m_new = a.T @ ka - np.outer(a.T @ (K.T @ b), bka) / s
    m_new = 0.5 * (m_new + m_new.T)
    p_shift = next_state.p - (2.0 * cfg.od / cfg.gr) * d
    h0 = cfg.ur / cfg.omega - 0.5 * (b @ p_shift)
    p_new = p_shift @ a + (2.0 * h0 / s) * bka
    return RiccatiState(m=m_new, p=p_new, omega=next_state.omega)


def complex_normal_trace_term(noise: ComplexNormalParams | None,
                              K: np.ndarray) -> float | None:
    """Tr(conj(C)^-1 K) for the process-noise constant, None when unavailable."""
    if noise is None:
        return None
    c = noise.c_matrix()
    if c is None:
        return None
    cbar = c.conj()
    if np.linalg.cond(cbar) > 1e12:
        return None
    sol = np.linalg.solve(cbar, K)
    val = complex(np.trace(sol))
    return _real_scalar(val, "noise trace term",
                        scale=float(np.abs(np.diagonal(sol)).sum()))


def omega_step(next_state: RiccatiState, model: DiscreteModel, b: np.ndarray,
               cfg: ControllerConfig,
               noise: ComplexNormalParams | None = None) -> float:
    """Constant term omega_{t-1} of the index; used for reporting only.

    The process-noise term Tr(conj(C)^-1 K) is included only when the noise
    pseudo-covariance is supplied and invertible; otherwise it is skipped
    (never fatal), matching :func:`complex_normal_trace_term`.
    """
    if next_state.omega is None:
        raise ValidationError("next index carries no omega to advance")
    K, b, s = _kernel(next_state, model, b, cfg)
    d = model.measurement_row
    p_shift = next_state.p - (2.0 * cfg.od / cfg.gr) * d
    h0 = _real_scalar(complex(cfg.ur / cfg.omega - 0.5 * (b @ p_shift)),
                      "index linear constant",
                      scale=0.5 * _contraction_scale(b, p_shift))
    value = (next_state.omega
             + cfg.od ** 2 / cfg.gr
             + np.log(cfg.gr / cfg.g)
             - (1.0 - cfg.g / cfg.gr)
             + cfg.ur ** 2 / cfg.omega
             - h0 ** 2 / s
             + np.log(cfg.omega * s))
    trace_term = complex_normal_trace_term(noise, K)
    if trace_term is not None:
        value -= trace_term
    return float(value)


def steady_index(model: DiscreteModel, b: np.ndarray, cfg: ControllerConfig,
                 init: RiccatiState | None = None,
                 rng: np.random.Generator | None = None,
                 tol: float = STEADY_TOL,
                 max_iter: int = STEADY_MAX_ITER) -> RiccatiState:
    """Fixed point of :func:`riccati_step` for frozen B.

    Starts from ``init`` if given, from a seeded random state if ``rng`` is
    given, and from zero otherwise.  Raises ConvergenceError (with the
    residual history attached) if the iteration cap is hit; this genuinely
    happens at operating states whose frozen-B pair leaves an observed
    population direction uncontrollable.
    """
    n2 = model.a.shape[0]
    if init is None:
        init = RiccatiState.random(n2, rng) if rng is not None else RiccatiState.zero(n2)
    state = init
    history = []
    converged = False
    polish_left = 100
    for _ in range(max_iter):
        new = riccati_step(state, model, b, cfg)
        dm = float(np.abs(new.m - state.m).max())
        dp = float(np.abs(new.p - state.p).max())
        resid = max(dm, dp)
        history.append(resid)
        # scale-aware: at index magnitudes ~1/gr an absolute increment
        # below the entry ulp is not representable
        m_scale = max(1.0, float(np.abs(new.m).max()))
        p_scale = max(1.0, float(np.abs(new.p).max()))
        state = new
        if dm < tol * m_scale and dp < tol * p_scale:
            # polish toward the numerical floor while still contracting
            converged = True
            if (dm < tol and dp < tol) or polish_left == 0 \
                    or (len(history) > 1 and resid > 0.5 * history[-2]):
                return state
            polish_left -= 1
        elif converged:
            return state
    if converged:
        return state
    raise ConvergenceError(
        f"steady index did not converge in {max_iter} iterations "
        f"(last residual {history[-1]:.3e})", history=history)


def control_law(x: np.ndarray, riccati: RiccatiState, model: DiscreteModel,
                b: np.ndarray, cfg: ControllerConfig) -> ControlLaw:
    """Mean v and variance R of the optimal Gaussian controller at state x.

    ``riccati`` holds the next-step index coefficients (M_t, P_t); ``b`` must
    be the control column evaluated at ``x``.
    """
    K, b, s = _kernel(riccati, model, b, cfg)
    x = np.asarray(x, dtype=complex).ravel()
    d = model.measurement_row
    p_shift = riccati.p - (2.0 * cfg.od / cfg.gr) * d
    h = cfg.ur / cfg.omega - b @ (K @ (model.a @ x)) - 0.5 * (b @ p_shift)
    h_scale = _contraction_scale(b, K, model.a @ x) \
        + 0.5 * _contraction_scale(b, p_shift)
    v = _real_scalar(complex(h), "control mean", scale=h_scale) / s
    r = 1.0 / s
    if r > cfg.omega * (1.0 + 1e-12):
        raise StructureError(
            f"control variance {r:.3e} exceeds the prior variance {cfg.omega:.3e}")
    return ControlLaw(v=v, r=r)


def gamma_closed_form(x: np.ndarray, riccati: RiccatiState) -> float:
    """-ln gamma(x) = 0.5 x^T M x + 0.5 P x + 0.5 omega at the current index."""
    x = np.asarray(x, dtype=complex).ravel()
    omega = riccati.omega if riccati.omega is not None else 0.0
    val = 0.5 * (x @ (riccati.m @ x)) + 0.5 * (riccati.p @ x) + 0.5 * omega
    scale = 0.5 * _contraction_scale(x, riccati.m, x) \
        + 0.5 * _contraction_scale(riccati.p, x)
    return _real_scalar(complex(val), "performance index", scale=scale)


def beta_closed_form(u: np.ndarray, x: np.ndarray, next_state: RiccatiState,
                     model: DiscreteModel, b: np.ndarray, cfg: ControllerConfig,
                     noise: ComplexNormalParams | None = None) -> np.ndarray:
    """State-averaged log-ratio beta(u, x), vectorized over control values u.

    Evaluated directly from the Gaussian moments: with mu = A x + B u,
    beta = 0.5 mu^T K mu + 0.5 (P - 2 od Gr^-1 D) mu + const, where the
    constant carries omega_t, the od and log-det terms, and (when available)
    the process-noise trace term.
    """
    K, b, s = _kernel(next_state, model, b, cfg)
    x = np.asarray(x, dtype=complex).ravel()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    d = model.measurement_row
    ax = model.a @ x
    p_shift = next_state.p - (2.0 * cfg.od / cfg.gr) * d
    omega_t = next_state.omega if next_state.omega is not None else 0.0
    const = 0.5 * omega_t + 0.5 * cfg.od ** 2 / cfg.gr \
        + 0.5 * np.log(cfg.gr / cfg.g) - 0.5 * (1.0 - cfg.g / cfg.gr)
    trace_term = complex_normal_trace_term(noise, K)
    if trace_term is not None:
        const -= 0.5 * trace_term
    # quadratic pieces, evaluated for every u on the grid
    quad_x = _real_scalar(complex(0.5 * (ax @ (K @ ax)) + 0.5 * (p_shift @ ax)),
                          "beta state part",
                          scale=0.5 * _contraction_scale(ax, K, ax)
                          + 0.5 * _contraction_scale(p_shift, ax))
    lin_u = _real_scalar(complex(b @ (K @ ax) + 0.5 * (b @ p_shift)),
                         "beta cross part",
                         scale=_contraction_scale(b, K, ax)
                         + 0.5 * _contraction_scale(b, p_shift))
    quad_u = _real_scalar(complex(0.5 * (b @ (K @ b))), "beta control part",
                          scale=0.5 * _contraction_scale(b, K, b))
    return quad_x + lin_u * u + quad_u * u ** 2 + const


def control_posterior_grid(x: np.ndarray, next_state: RiccatiState,
                           model: DiscreteModel, b: np.ndarray,
                           cfg: ControllerConfig,
                           noise: ComplexNormalParams | None = None,
                           num: int = 4001,
                           max_expand: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Grid of log[ Ic(u) exp(-beta(u, x)) ] over an adaptively located window.

    Stage one starts on [ur - 10 sqrt(Omega), ur + 10 sqrt(Omega)] and
    recenters/doubles until the mode is interior with decayed tails; stage
    two re-grids tightly around the mode using its finite-difference
    curvature, so the trapezoid integral of the (Gaussian) integrand is
    accurate to rounding.
    """
    def logf(u):
        prior = -0.5 * np.log(2 * np.pi * cfg.omega) \
            - 0.5 * (u - cfg.ur) ** 2 / cfg.omega
        return prior - beta_closed_form(u, x, next_state, model, b, cfg, noise)

    center = cfg.ur
    half = 10.0 * np.sqrt(cfg.omega)
    for _ in range(max_expand):
        u = np.linspace(center - half, center + half, num)
        vals = logf(u)
        k = int(np.argmax(vals))
        interior = num // 20 < k < num - 1 - num // 20
        decayed = (vals[0] <= vals[k] - 80.0) and (vals[-1] <= vals[k] - 80.0)
        if interior and decayed:
            break
        center = u[k]
        half *= 2.0
    else:
        raise ConvergenceError("could not bracket the control posterior mode")
    # curvature from the bracketing stencil, then a tight final grid
    h = u[1] - u[0]
    curv = -(vals[k - 1] - 2 * vals[k] + vals[k + 1]) / h ** 2
    sigma = 1.0 / np.sqrt(curv) if curv > 0 else half
    half_fine = max(40.0 * sigma, 1e-8 * max(1.0, abs(u[k])))
    u = np.linspace(u[k] - half_fine, u[k] + half_fine, num)
    return u, logf(u)


def gamma_quadrature_oracle(x: np.ndarray, next_state: RiccatiState,
                            model: DiscreteModel, b: np.ndarray,
                            cfg: ControllerConfig,
                            noise: ComplexNormalParams | None = None,
                            num: int = 4001) -> float:
    """-ln of int Ic(u) exp(-beta(u, x)) du by log-sum-exp trapezoid.

    Numeric counterpart of the one-step-back closed form
    (:func:`riccati_step` + :func:`omega_step` + :func:`gamma_closed_form`);
    independent of the completion-of-squares algebra it validates.
    """
    u, vals = control_posterior_grid(x, next_state, model, b, cfg, noise, num=num)
    top = vals.max()
    integral = np.trapezoid(np.exp(vals - top), u)
    return float(-(top + np.log(integral)))


def posterior_mode_curvature(u: np.ndarray, logf: np.ndarray) -> tuple[float, float]:
    """Parabolic-refined argmax and curvature of a gridded log-integrand.

    For the exactly quadratic log-integrands produced here the three-point
    parabola is exact up to rounding, so the returned mode matches the
    analytic controller mean far below the grid resolution.
    """
    k = int(np.argmax(logf))
    k = min(max(k, 1), len(u) - 2)
    h = u[1] - u[0]
    num = logf[k - 1] - logf[k + 1]
    den = logf[k - 1] - 2 * logf[k] + logf[k + 1]
    shift = 0.5 * h * num / den if den != 0 else 0.0
    curvature = -den / h ** 2
    return float(u[k] + shift), float(curvature)


def index_psd_defect(riccati: RiccatiState, dim: int) -> float:
    """Smallest eigenvalue of the realified quadratic coefficient M.

    M is expressible as W^T W on paired vectors iff this is >= 0 (up to
    rounding); the acceptance floor is -1e-9.
    """
    T = realification(dim)
    real_m = T.T @ riccati.m @ T
    real_m = 0.5 * (real_m + real_m.T)
    if np.abs(real_m.imag).max() > 1e-8 * max(1.0, np.abs(real_m.real).max()):
        raise StructureError("realified index matrix has a complex residue")
    return float(np.linalg.eigvalsh(real_m.real).min())


def backward_recursion(model: DiscreteModel, b: np.ndarray, cfg: ControllerConfig,
                       terminal: RiccatiState, steps: int) -> list[RiccatiState]:
    """Pure finite-horizon backward pass with frozen B (study mode).

    Returns [terminal, one step back, ...]; length steps + 1.
    """
    out = [terminal]
    for _ in range(steps):
        out.append(riccati_step(out[-1], model, b, cfg))
    return out
