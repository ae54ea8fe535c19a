"""Small conic-program builder over cvxpy.

Programs are assembled from named real variables, lifted complex vectors and
explicit cones (second-order, rotated second-order, exponential), then solved
by a conic interior-point backend. Two log-constraint modes are offered:

``expcone``    every ``target <= log(argument)`` is an exponential cone.
``bisection``  constraints whose target depends on the objective scalar only
               become linear (``argument >= exp(target)``) at a fixed value of
               that scalar, which is then bisected. Other log constraints stay
               exponential cones.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import cvxpy as cp
import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


class ProgramError(ValueError):
    """Malformed program (duplicate names, bad shapes, missing objective)."""


@dataclass(frozen=True)
class SolverSettings:
    mode: str = "expcone"  # or "bisection"
    solver: str = "CLARABEL"
    max_iters: int = 200
    tol: float = 1e-8
    residual_tol: float = 1e-6
    bisection_tol: float = 1e-7
    bisection_max_steps: int = 200

    def __post_init__(self):
        if self.mode not in ("expcone", "bisection"):
            raise ValueError("mode must be 'expcone' or 'bisection'")


@dataclass
class Solution:
    status: Status
    values: dict[str, np.ndarray | float] = field(default_factory=dict)
    objective: float = math.nan
    iterations: int = 0
    residual: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, name: str):
        return self.values[name]


class ComplexAffine:
    """Complex affine expression held as a (real, imag) pair of cvxpy expressions."""

    def __init__(self, re, im):
        self.re = re
        self.im = im

    @property
    def shape(self):
        return self.re.shape

    def __getitem__(self, idx) -> "ComplexAffine":
        return ComplexAffine(self.re[idx], self.im[idx])

    def real_inner(self, a) -> cp.Expression:
        """Re{a^H x}."""
        a = np.asarray(a, complex)
        return a.real @ self.re + a.imag @ self.im

    def linear(self, A, offset=None) -> "ComplexAffine":
        """A x + offset for a complex matrix (or vector: scalar result)."""
        A = np.asarray(A, complex)
        re = A.real @ self.re - A.imag @ self.im
        im = A.real @ self.im + A.imag @ self.re
        if offset is not None:
            offset = np.asarray(offset, complex)
            re = re + offset.real
            im = im + offset.imag
        return ComplexAffine(re, im)

    def scaled(self, d) -> "ComplexAffine":
        """Entry-wise product with a complex vector ``d``."""
        d = np.asarray(d, complex)
        return ComplexAffine(cp.multiply(d.real, self.re) - cp.multiply(d.imag, self.im),
                             cp.multiply(d.real, self.im) + cp.multiply(d.imag, self.re))

    def stacked(self) -> cp.Expression:
        return cp.hstack([cp.reshape(self.re, (-1,), order="C"),
                          cp.reshape(self.im, (-1,), order="C")])

    def sq_norm(self) -> cp.Expression:
        return cp.sum_squares(self.re) + cp.sum_squares(self.im)


@dataclass
class _ExpLog:
    target: cp.Expression
    argument: cp.Expression


class ProgramBuilder:
    """Append-only container for one convex program."""

    def __init__(self):
        self._vars: dict[str, object] = {}
        self._constraints: list[cp.Constraint] = []
        self._exp_logs: list[_ExpLog] = []
        self._counts = {"linear": 0, "soc": 0, "rsoc": 0, "exp": 0, "convex": 0}
        self._objective: tuple[str, cp.Expression] | None = None

    # -- variables -------------------------------------------------------
    def _register(self, name: str, obj):
        if name in self._vars:
            raise ProgramError(f"duplicate variable name {name!r}")
        self._vars[name] = obj
        return obj

    def add_real(self, name: str, shape=(), nonneg: bool = False) -> cp.Variable:
        return self._register(name, cp.Variable(shape, name=name, nonneg=nonneg))

    def add_complex_vector(self, name: str, dim: int) -> ComplexAffine:
        if dim < 0:
            raise ProgramError("dim must be >= 0")
        x = ComplexAffine(cp.Variable(dim, name=f"{name}.re"), cp.Variable(dim, name=f"{name}.im"))
        return self._register(name, x)

    # -- constraints -----------------------------------------------------
    @staticmethod
    def _check(expr, what: str):
        if not isinstance(expr, (cp.Expression, int, float, np.number, np.ndarray)):
            raise ProgramError(f"{what} is not an expression")
        if isinstance(expr, cp.Expression) and not expr.is_affine():
            raise ProgramError(f"{what} must be affine")

    def add_linear(self, constraint: cp.Constraint) -> None:
        """Affine equality or inequality."""
        for e in constraint.args:
            self._check(e, "linear constraint side")
        self._constraints.append(constraint)
        self._counts["linear"] += 1

    def add_soc(self, norm_args, bound) -> None:
        """||norm_args|| <= bound."""
        self._check(norm_args, "cone argument")
        self._check(bound, "cone bound")
        self._constraints.append(cp.SOC(cp.reshape(bound, (), order="C"),
                                        cp.reshape(norm_args, (-1,), order="C")))
        self._counts["soc"] += 1

    def add_rotated_cone(self, u, v, w) -> None:
        """u * v >= ||w||^2 with u, v >= 0."""
        for e, what in ((u, "u"), (v, "v"), (w, "w")):
            self._check(e, what)
        w = cp.reshape(cp.hstack([w]) if not isinstance(w, cp.Expression) else w, (-1,), order="C")
        args = cp.hstack([2 * w, cp.reshape(u - v, (1,), order="C")])
        self._constraints.append(cp.SOC(cp.reshape(u + v, (), order="C"), args))
        self._counts["rsoc"] += 1

    def add_quadratic_le(self, vec, bound) -> None:
        """||vec||^2 <= bound, as a rotated cone with unit second side."""
        self.add_rotated_cone(bound, 1.0, vec)

    def add_convex_le(self, lhs, rhs) -> None:
        """lhs <= rhs for a convex ``lhs`` built from squares (canonicalized to cones)."""
        if not isinstance(lhs, cp.Expression) or not lhs.is_convex():
            raise ProgramError("lhs must be a convex expression")
        self._check(rhs, "rhs")
        self._constraints.append(lhs <= rhs)
        self._counts["convex"] += 1

    def add_exp_log(self, target, argument) -> None:
        """target <= log(argument)."""
        self._check(target, "log target")
        self._check(argument, "log argument")
        self._exp_logs.append(_ExpLog(cp.reshape(target, (), order="C"),
                                      cp.reshape(argument, (), order="C")))
        self._counts["exp"] += 1

    # -- objective -------------------------------------------------------
    def maximize(self, expr) -> None:
        self._check(expr, "objective")
        self._objective = ("max", expr)

    def minimize(self, expr) -> None:
        self._check(expr, "objective")
        self._objective = ("min", expr)

    @property
    def cone_counts(self) -> dict[str, int]:
        return dict(self._counts)

    # -- solve -----------------------------------------------------------
    def _problem(self, extra=(), objective=None) -> cp.Problem:
        sense, expr = objective if objective is not None else self._objective
        obj = cp.Maximize(expr) if sense == "max" else cp.Minimize(expr)
        return cp.Problem(obj, list(self._constraints) + list(extra))

    def _exp_cones(self, logs) -> list[cp.Constraint]:
        return [cp.constraints.ExpCone(e.target, cp.Constant(1.0), e.argument) for e in logs]

    def _collect(self, prob: cp.Problem, status: Status) -> Solution:
        sol = Solution(status=status)
        stats = prob.solver_stats
        sol.iterations = int(stats.num_iters) if stats and stats.num_iters is not None else 0
        if status is not Status.OPTIMAL:
            return sol
        for name, obj in self._vars.items():
            if isinstance(obj, ComplexAffine):
                sol.values[name] = np.asarray(obj.re.value, float) + 1j * np.asarray(obj.im.value, float)
            else:
                val = np.asarray(obj.value, float)
                sol.values[name] = float(val) if val.ndim == 0 else val
        sol.objective = float(self._objective[1].value) if isinstance(
            self._objective[1], cp.Expression) else float(self._objective[1])
        return sol

    @staticmethod
    def _exp_violation(c) -> np.ndarray | None:
        """Violation of x <= y log(z / y) in log form; None when y or z is not positive."""
        x, y, z = (np.asarray(a.value, float) for a in c.args)
        if np.any(y <= 0) or np.any(z <= 0):
            return None
        return np.maximum(x - y * np.log(z / y), 0.0)

    def _residual(self, constraints) -> float:
        worst = 0.0
        for c in constraints:
            v = self._exp_violation(c) if isinstance(c, cp.constraints.ExpCone) else None
            if v is None:
                # cvxpy projects onto the cone here, which costs a solve per constraint
                v = c.violation()
            v = float(np.max(v)) if np.size(v) else 0.0
            worst = max(worst, v)
        return worst

    def _run(self, prob: cp.Problem, settings: SolverSettings) -> Status:
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are screened by the residual check instead
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=settings.solver, max_iter=settings.max_iters,
                           tol_gap_abs=settings.tol, tol_gap_rel=settings.tol, tol_feas=settings.tol)
        except cp.error.SolverError:
            return Status.NUMERICAL_TROUBLE
        st = prob.status
        if st == cp.OPTIMAL:
            return Status.OPTIMAL
        if st in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return Status.INFEASIBLE
        if st in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return Status.UNBOUNDED
        if st == cp.OPTIMAL_INACCURATE:
            return Status.OPTIMAL  # accepted only if the residual check below passes
        return Status.NUMERICAL_TROUBLE

    def solve(self, settings: SolverSettings | None = None) -> Solution:
        settings = settings or SolverSettings()
        if self._objective is None:
            raise ProgramError("objective not set")
        if settings.mode == "bisection":
            return self._solve_bisection(settings)
        exp = self._exp_cones(self._exp_logs)
        prob = self._problem(exp)
        status = self._run(prob, settings)
        sol = self._collect(prob, status)
        if sol.ok:
            sol.residual = self._residual(prob.constraints)
            if sol.residual > settings.residual_tol:
                return Solution(Status.NUMERICAL_TROUBLE, iterations=sol.iterations,
                                residual=sol.residual)
        return sol

    # -- bisection mode --------------------------------------------------
    def _split_logs(self, scalar: cp.Variable):
        pure, mixed = [], []
        for e in self._exp_logs:
            vars_ = e.target.variables()
            if vars_ and all(v.id == scalar.id for v in vars_):
                pure.append(e)
            else:
                mixed.append(e)
        return pure, mixed

    def _solve_bisection(self, settings: SolverSettings) -> Solution:
        sense, expr = self._objective
        if sense != "max" or not isinstance(expr, cp.Variable) or expr.size != 1:
            raise ProgramError("bisection mode needs 'maximize <scalar variable>'")
        scalar = expr
        pure, mixed = self._split_logs(scalar)
        # target = a * scalar + c for each pure constraint
        coeffs = []
        saved = scalar.value
        for e in pure:
            scalar.value = 0.0
            c0 = float(e.target.value)
            scalar.value = 1.0
            coeffs.append((float(e.target.value) - c0, c0))
        scalar.value = saved

        level = cp.Parameter(name="bisection_level")
        floors = [cp.Parameter(name=f"exp_floor_{i}") for i in range(len(pure))]
        extra = [scalar == level]
        extra += [e.argument >= f for e, f in zip(pure, floors)]
        extra += self._exp_cones(mixed)
        prob = self._problem(extra, objective=("min", cp.Constant(0.0)))

        total_iters = 0

        def feasible(t: float) -> bool:
            nonlocal total_iters
            level.value = t
            for (a, c), f in zip(coeffs, floors):
                f.value = math.exp(min(a * t + c, 700.0))
            status = self._run(prob, settings)
            total_iters += int(prob.solver_stats.num_iters or 0) if prob.solver_stats else 0
            return status is Status.OPTIMAL and self._residual(prob.constraints) <= settings.residual_tol

        lo, step, found = 0.0, 1.0, False
        for _ in range(60):
            if feasible(lo):
                found = True
                break
            lo -= step
            step *= 2
        if not found:
            return Solution(Status.INFEASIBLE, iterations=total_iters)
        hi, step = lo + 1.0, 1.0
        for _ in range(60):
            if not feasible(hi):
                break
            lo, step = hi, step * 2
            hi = lo + step
        else:
            return Solution(Status.UNBOUNDED, iterations=total_iters)
        for _ in range(settings.bisection_max_steps):
            if hi - lo <= settings.bisection_tol:
                break
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        if not feasible(lo):
            return Solution(Status.NUMERICAL_TROUBLE, iterations=total_iters)
        sol = self._collect(prob, Status.OPTIMAL)
        sol.objective = lo
        sol.iterations = total_iters
        sol.residual = self._residual(prob.constraints)
        return sol

    # -- debug dump ------------------------------------------------------
    def dump(self, path: str | Path, settings: SolverSettings | None = None) -> None:
        """Write the conic standard form (min c^T x s.t. A x + s = b, s in K) as text.

        Layout: a header line per block ("# c", "# b", "# A", "# cones"), then
        one value per line for vectors, "row col value" triplets for A, and
        "kind size" lines for the cone list in row order.
        """
        settings = settings or SolverSettings()
        prob = self._problem(self._exp_cones(self._exp_logs))
        data, _, _ = prob.get_problem_data(settings.solver)
        A = data["A"].tocoo()
        lines = [f"# n={A.shape[1]} m={A.shape[0]}", "# c"]
        lines += [repr(float(v)) for v in data["c"]]
        lines.append("# b")
        lines += [repr(float(v)) for v in data["b"]]
        lines.append("# A")
        lines += [f"{r} {c} {float(v)!r}" for r, c, v in zip(A.row, A.col, A.data)]
        lines.append("# cones")
        dims = data["dims"]
        if dims.zero:
            lines.append(f"zero {dims.zero}")
        if dims.nonneg:
            lines.append(f"nonneg {dims.nonneg}")
        for q in dims.soc:
            lines.append(f"soc {q}")
        for _ in range(dims.exp):
            lines.append("exp 3")
        Path(path).write_text("\n".join(lines) + "\n")


def solve(builder: ProgramBuilder, settings: SolverSettings | None = None) -> Solution:
    return builder.solve(settings)
