r"""Min-max characterization of the ground-state energy at fixed positive
projector, evaluated on a coarse grid.

E(P+) = inf over N-frames Phi+ in range(P+) of sup over N-frames Psi in
range(P-) + span(Phi+) of the total energy.  The inner sup runs Riemannian
gradient ascent on the orthonormal-frame manifold (QR retraction, Armijo
backtracking, warm-started between outer iterates); the outer inf runs
Riemannian descent with the Danskin gradient evaluated at the inner
maximizer.  Both loops are preconditioned by the compressed bare spectrum:
the curvature along a basis direction of energy mu scales like |mu - c^2|,
which spans six orders of magnitude between bound and box-edge states, and
an unpreconditioned scalar step stalls on the soft directions.

The result is a verification tool: at large c it must agree with the plain
SCF energy and be independent of the projector choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configurations import ElectronicConfiguration
from .grids import RadialGrid
from .meanfield import (
    bare_channel,
    entry_interaction_terms,
    entry_two_body_matrix,
)
from .potentials import NuclearModel
from .projectors import Projector, free_positive_projector, spectral_projector
from .scf import SCFControls, SCFError, scf_solve, _validate_shells

__all__ = ["MinMaxControls", "MinMaxReport", "MinMaxDivergence", "maxmin_energy"]

MAX_COARSE_SIZE = 120


class MinMaxDivergence(RuntimeError):
    """Inner ascent exceeded the upper energy bound N c^2: the projector is
    not close enough to the free one (or c is too small)."""


@dataclass(frozen=True)
class MinMaxControls:
    inner_grad_tol: float = 1e-9
    outer_grad_tol: float = 1e-8
    max_inner: int = 600
    max_outer: int = 400
    initial_step: float = 0.5
    restart_seed: int = 20240801


@dataclass
class MinMaxReport:
    E_outer: float
    inner_sup_values: list = field(default_factory=list)
    outer_iterates: list = field(default_factory=list)
    projector_source: str = "free"
    gap_to_scf: float = float("nan")
    E_scf: float = float("nan")
    converged: bool = False
    restarts: int = 0


class _FrameProblem:
    """Energy, gradient, and subspace bookkeeping for per-channel frames."""

    def __init__(self, nuclear, shells, c, grid):
        self.nuclear = nuclear
        self.c = c
        self.grid = grid
        self.channels = []
        for s in shells:
            if s.kappa not in self.channels:
                self.channels.append(s.kappa)
        self.specs = {
            k: sorted([s for s in shells if s.kappa == k], key=lambda s: s.n)
            for k in self.channels
        }
        self.weights = {k: np.array([s.w for s in self.specs[k]]) for k in self.channels}
        self.N = sum(s.w for s in shells)
        self.single = len(shells) == 1 and abs(self.N - 1.0) < 1e-12
        cfg = ElectronicConfiguration(
            shells=(), Z=nuclear.Z, c=c, grid=grid, nuclear=nuclear, N=0.0
        )
        self.bare = {k: bare_channel(cfg, k).matrix for k in self.channels}

    def entries(self, frames):
        out = []
        M = self.grid.size
        sa = np.sqrt(self.grid.node_weights)
        sb = np.sqrt(self.grid.mid_weights)
        for k in self.channels:
            Y = frames[k]
            for i, w in enumerate(self.weights[k]):
                out.append((k, float(w), Y[:M, i] / sa, Y[M:, i] / sb))
        return out

    def energy(self, frames) -> float:
        E = 0.0
        for k in self.channels:
            Y = frames[k]
            HY = self.bare[k] @ Y
            E += float(np.sum(self.weights[k] * np.einsum("ij,ij->j", Y, HY)))
        direct, exchange = entry_interaction_terms(
            self.grid, self.entries(frames), self.single
        )
        return E + direct - exchange

    def gradient(self, frames):
        """dE/dY per channel: column i is 2 w_i Hbar psi_i."""
        entries = self.entries(frames)
        grads = {}
        for k in self.channels:
            H = self.bare[k] + entry_two_body_matrix(self.grid, entries, k, self.single)
            grads[k] = 2.0 * (H @ frames[k]) * self.weights[k][None, :]
        return grads


def _stiefel_tangent(Y, G):
    S = Y.T @ G
    return G - Y @ (0.5 * (S + S.T))


def _retract(Y):
    Q, R = np.linalg.qr(Y)
    return Q * np.sign(np.diag(R))[None, :]


def _dot(A, B):
    return sum(float(np.sum(A[k] * B[k])) for k in A)


def _inner_sup(problem, Wbases, pc, Y0, bound, grad_tol, max_iter, step0):
    """Maximize the energy over per-channel frames W_k Y_k.

    pc[k] is the diagonal preconditioner on the rows of Y_k.  Returns the
    maximizer coefficients, frames, energy, and the value trace.
    """
    Y = {k: _retract(Y0[k]) for k in Y0}
    frames = {k: Wbases[k] @ Y[k] for k in Y}
    E = problem.energy(frames)
    values = [E]
    step = step0
    for _ in range(max_iter):
        if E > bound:
            raise MinMaxDivergence(
                f"inner ascent reached {E:.6f}, above the N c^2 + 10 guard {bound:.6f}"
            )
        G_full = problem.gradient(frames)
        G, D = {}, {}
        for k in Y:
            Gk = _stiefel_tangent(Y[k], Wbases[k].T @ G_full[k])
            G[k] = Gk
            D[k] = _stiefel_tangent(Y[k], pc[k][:, None] * Gk)
        slope = _dot(G, D)
        if slope < grad_tol:
            break
        improved = False
        while step > 1e-18:
            Y_try = {k: _retract(Y[k] + step * D[k]) for k in Y}
            frames_try = {k: Wbases[k] @ Y_try[k] for k in Y}
            E_try = problem.energy(frames_try)
            if E_try > E + 1e-4 * step * slope:
                Y, frames, E = Y_try, frames_try, E_try
                values.append(E)
                step = min(step * 1.8, 2.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return Y, frames, E, values


def maxmin_energy(
    nuclear: NuclearModel,
    shells,
    c: float,
    grid: RadialGrid,
    source: str = "free",
    projectors: dict[int, Projector] | None = None,
    controls: MinMaxControls | None = None,
    scf_reference: float | None = None,
) -> MinMaxReport:
    """Evaluate the min-max energy at the given projector choice.

    source "free" uses the free positive projectors; "mean_field" first runs
    the plain SCF on the same grid and uses the converged mean-field
    projectors; "file" takes the supplied per-channel projectors.  Raises
    MinMaxDivergence when the inner ascent escapes above N c^2 + 10 at an
    accepted outer iterate.
    """
    if grid.size > MAX_COARSE_SIZE:
        raise ValueError(
            f"min-max evaluation is a coarse-grid tool: got M={grid.size}, "
            f"need M <= {MAX_COARSE_SIZE}"
        )
    controls = controls or MinMaxControls()
    _validate_shells(shells, nuclear.Z)
    problem = _FrameProblem(nuclear, shells, c, grid)
    N = problem.N

    scf_rep = None
    if scf_reference is None or source == "mean_field":
        scf_rep = scf_solve(
            nuclear, shells, c, grid=grid,
            controls=SCFControls(projector_diagnostics=False),
        )
        if not scf_rep.converged:
            raise SCFError("reference SCF did not converge on the coarse grid")
    E_scf = scf_reference if scf_reference is not None else scf_rep.energy.total

    if source == "free":
        projs = {k: free_positive_projector(k, c, grid) for k in problem.channels}
    elif source == "mean_field":
        from .meanfield import mean_field_matrix

        projs = {
            k: spectral_projector(
                mean_field_matrix(scf_rep.configuration, k), 0.0, source="mean_field"
            )
            for k in problem.channels
        }
    elif source == "file":
        if not projectors:
            raise ValueError("source='file' needs projectors per channel")
        projs = projectors
    else:
        raise ValueError(f"unknown projector source {source!r}")

    # Per-channel bases of range(P+/P-), rotated to the eigenbasis of the
    # compressed bare operator so the curvature preconditioner is diagonal.
    Upos, Uneg, mu_pos, mu_neg = {}, {}, {}, {}
    for k in problem.channels:
        P = projs[k]
        vals, vecs = np.linalg.eigh(P.matrix)
        up = vecs[:, vals > 0.5]
        un = vecs[:, vals <= 0.5]
        for which, U in (("pos", up), ("neg", un)):
            Hc = U.T @ (problem.bare[k] @ U)
            mu, T = np.linalg.eigh(0.5 * (Hc + Hc.T))
            if which == "pos":
                Upos[k], mu_pos[k] = U @ T, mu
            else:
                Uneg[k], mu_neg[k] = U @ T, mu
    c2 = c * c
    pc_pos = {k: 1.0 / (np.abs(mu_pos[k] - c2) + 10.0) for k in problem.channels}

    bound = N * c2 + 10.0

    # outer variable: X_k with Phi+_k = Upos_k X_k, initialized at the
    # projected bare gap states (the leading columns after the rotation)
    X = {}
    for k in problem.channels:
        gap = np.where((mu_pos[k] > 0.0) & (mu_pos[k] < c2))[0]
        n_k = len(problem.specs[k])
        if len(gap) < n_k:
            raise SCFError(f"projected channel kappa={k} has too few gap levels")
        Xk = np.zeros((Upos[k].shape[1], n_k))
        for j, i in enumerate(gap[:n_k]):
            Xk[i, j] = 1.0
        X[k] = Xk

    def spaces_for(Xcur):
        W, pc_in = {}, {}
        for k in problem.channels:
            Phi = Upos[k] @ Xcur[k]
            W[k] = np.hstack([Uneg[k], Phi])
            pc_in[k] = np.concatenate(
                [1.0 / (np.abs(mu_neg[k] - c2) + 10.0), np.full(Xcur[k].shape[1], 0.05)]
            )
        return W, pc_in

    def warm_Y(W, frames_prev):
        Y0 = {}
        for k in problem.channels:
            n_k = len(problem.specs[k])
            if frames_prev is None:
                R = W[k].shape[1]
                Y0[k] = np.zeros((R, n_k))
                Y0[k][-n_k:, :] = np.eye(n_k)
            else:
                Y0[k] = W[k].T @ frames_prev[k]
        return Y0

    rng = np.random.default_rng(controls.restart_seed)
    outer_vals, inner_trace = [], []
    frames_prev = None
    step_out = controls.initial_step
    converged = False
    restarts = 0

    for _ in range(controls.max_outer):
        W, pc_in = spaces_for(X)
        Y0 = warm_Y(W, frames_prev)
        Ystar, frames, E_in, values = _inner_sup(
            problem, W, pc_in, Y0, bound, controls.inner_grad_tol,
            controls.max_inner, controls.initial_step,
        )
        frames_prev = frames
        inner_trace = values
        outer_vals.append(E_in)
        # Danskin gradient on the outer Stiefel variables
        G_full = problem.gradient(frames)
        G, D = {}, {}
        for k in problem.channels:
            Phi = Upos[k] @ X[k]
            Zk = Phi.T @ frames[k]
            Gk = _stiefel_tangent(X[k], Upos[k].T @ (G_full[k] @ Zk.T))
            G[k] = Gk
            D[k] = _stiefel_tangent(X[k], pc_pos[k][:, None] * Gk)
        slope = _dot(G, D)
        if slope < controls.outer_grad_tol:
            converged = True
            break
        improved = False
        step = step_out
        while step > 1e-16:
            X_try = {k: _retract(X[k] - step * D[k]) for k in X}
            W_try, pc_try = spaces_for(X_try)
            Y0_try = warm_Y(W_try, frames_prev)
            try:
                _, frames_try, E_try, _ = _inner_sup(
                    problem, W_try, pc_try, Y0_try, bound,
                    controls.inner_grad_tol, controls.max_inner, controls.initial_step,
                )
            except MinMaxDivergence:
                step *= 0.5
                continue
            if E_try < E_in - 1e-4 * step * slope:
                X = X_try
                frames_prev = frames_try
                step_out = min(step * 1.8, 2.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            if restarts < 2 and slope > 100 * controls.outer_grad_tol:
                # possibly a degenerate inner maximizer: deterministic restart
                restarts += 1
                for k in X:
                    X[k] = _retract(X[k] + 1e-3 * rng.standard_normal(X[k].shape))
                frames_prev = None
                continue
            converged = slope < 100 * controls.outer_grad_tol
            break

    E_outer = outer_vals[-1]
    return MinMaxReport(
        E_outer=E_outer,
        inner_sup_values=inner_trace,
        outer_iterates=outer_vals,
        projector_source=source,
        gap_to_scf=abs(E_outer - E_scf),
        E_scf=E_scf,
        converged=converged,
        restarts=restarts,
    )
