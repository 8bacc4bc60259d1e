"""Command-line experiments: degrade an image, restore it, export traces.

Tasks
-----
deblur-uniform   9x9 uniform blur, noise sigma = sqrt(2) by default
deblur-gaussian  9x9 Gaussian blur (std 1.6), same noise
superres         7x7 Gaussian blur (std 1.6), x3 decimation, sigma = 5
lindemo          linear fixed-point exactness demonstration (no input)
check-denoiser   homogeneity / passivity report for the built-in denoisers

The degradation is synthesized in-tool from the ground-truth input (seeded,
bit-reproducible), so PSNR against the ground truth is always available.
Images travel as binary PGM (P5); ASCII P2 is accepted on input.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import extrapolation as ve
from .denoisers import GaussianFilter, Identity, PatchWeighted
from .imaging import (
    Blur,
    BlurDownsample,
    InvalidSize,
    KernelTooLarge,
    ShapeMismatch,
    degrade,
    make_psf,
    psnr,
    synthetic_image,
)
from .objective import (
    CgNoConvergence,
    RedObjective,
    as_fixed_point_problem,
    check_local_homogeneity,
    check_passivity,
    default_step_size,
)
from .solvers import (
    IterationTrace,
    LinearFixedPointProblem,
    NonFiniteIterate,
    SolveConfig,
    solve,
)

TASKS = ("deblur-uniform", "deblur-gaussian", "superres", "lindemo", "check-denoiser")
METHODS = ("fp", "fp-mpe", "fp-rre", "fp-svdmpe", "sd", "sd-mpe", "nesterov")
IMAGE_TASKS = ("deblur-uniform", "deblur-gaussian", "superres")

DEFAULT_ALPHA = 0.02
DEFAULT_MAX_ITERS = 200

# cli method -> (driver method, weight rule)
_METHOD_MAP = {
    "fp": ("fp", ve.MPE),
    "fp-mpe": ("fp-ve", ve.MPE),
    "fp-rre": ("fp-ve", ve.RRE),
    "fp-svdmpe": ("fp-ve", ve.SVDMPE),
    "sd": ("sd", ve.MPE),
    "sd-mpe": ("sd-ve", ve.MPE),
    "nesterov": ("nesterov", ve.MPE),
}


class UsageError(Exception):
    """Bad command line; the message lists the valid flags."""


class MalformedHeader(ValueError):
    """PGM data that cannot be parsed."""


class UnsupportedMaxval(ValueError):
    """PGM maxval outside the supported 8-bit range."""


class IoFailure(OSError):
    """File could not be read or written."""


@dataclass
class ExperimentConfig:
    task: str
    input: str | None
    output_dir: str
    method: str
    solve: SolveConfig
    alpha: float
    sigma: float
    seed: int
    trace_path: str | None


def task_denoiser(task: str):
    """Default denoiser per task: linear smoother for deblurring (keeps the
    objective quadratic), patch-weighted for super-resolution."""
    if task == "superres":
        return PatchWeighted()
    return GaussianFilter(std=0.55, support=5)


def task_operator(task: str, shape: tuple[int, int]):
    if task == "deblur-uniform":
        return Blur(make_psf("uniform", 9), shape)
    if task == "deblur-gaussian":
        return Blur(make_psf("gaussian", 9, 1.6), shape)
    if task == "superres":
        return BlurDownsample(make_psf("gaussian", 7, 1.6), 3, shape)
    raise ValueError(f"task {task!r} has no degradation operator")


def _default_sigma(task: str) -> float:
    return 5.0 if task == "superres" else float(np.sqrt(2.0))


def _default_m_kappa(task: str, method: str) -> tuple[int, int]:
    if method == "sd-mpe":
        return (1, 10) if task == "superres" else (0, 8)
    return (0, 5)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); surface it instead
        raise UsageError(f"{message}\n{self.format_usage()}")


def parse_args(argv) -> ExperimentConfig:
    parser = _Parser(prog="redve", description=__doc__, add_help=True)
    parser.add_argument("--task", required=True, choices=TASKS)
    parser.add_argument("--input", help="ground-truth PGM image (image tasks)")
    parser.add_argument("--output-dir", default=".", help="where degraded/restored images go")
    parser.add_argument("--method", default="fp-mpe", choices=METHODS)
    parser.add_argument("--m", type=int, default=None, help="warm-up steps per cycle")
    parser.add_argument("--kappa", type=int, default=None, help="extrapolation order")
    parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    parser.add_argument("--sigma", type=float, default=None, help="noise std (task default)")
    parser.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    parser.add_argument("--tol", type=float, default=0.0)
    parser.add_argument("--stabilize", type=int, default=0,
                        help="extra baseline steps after cycling ends")
    parser.add_argument("--step-size", type=float, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trace", default=None, help="write the convergence trace CSV here")
    try:
        args = parser.parse_args(argv)
    except UsageError:
        raise
    task, method = args.task, args.method
    if task in IMAGE_TASKS and not args.input:
        raise UsageError(f"--input is required for task {task}\n{parser.format_usage()}")
    if not args.output_dir:
        raise UsageError("--output-dir must be nonempty")
    sigma = args.sigma if args.sigma is not None else _default_sigma(task)
    if sigma <= 0:
        raise UsageError("--sigma must be > 0")
    if args.alpha <= 0:
        raise UsageError("--alpha must be > 0")
    m0, kappa0 = _default_m_kappa(task, method)
    m = args.m if args.m is not None else m0
    kappa = args.kappa if args.kappa is not None else kappa0
    driver_method, ve_method = _METHOD_MAP[method]
    step_size = args.step_size
    if step_size is None and driver_method in ("sd", "sd-ve", "nesterov"):
        step_size = default_step_size(sigma, args.alpha)
    try:
        solve_config = SolveConfig(
            method=driver_method,
            ve_method=ve_method,
            m=m,
            kappa=kappa,
            max_inner_steps=args.max_iters,
            tol=args.tol,
            stabilization_iters=args.stabilize,
            step_size=step_size,
        )
    except ValueError as exc:
        raise UsageError(f"{exc}\n{parser.format_usage()}") from exc
    return ExperimentConfig(
        task=task,
        input=args.input,
        output_dir=args.output_dir,
        method=method,
        solve=solve_config,
        alpha=args.alpha,
        sigma=sigma,
        seed=args.seed,
        trace_path=args.trace,
    )


# ---------------------------------------------------------------------------
# PGM input / output
# ---------------------------------------------------------------------------


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        ch = data[pos]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise MalformedHeader("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a P5 (binary) or P2 (ASCII) PGM with maxval <= 255."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise MalformedHeader(f"{path}: not a P5/P2 PGM")
    fields = []
    pos = 2
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError as exc:
            raise MalformedHeader(f"{path}: bad header token {token!r}") from exc
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"{path}: bad dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise UnsupportedMaxval(f"{path}: maxval {maxval} (only 8-bit supported)")
    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte between maxval and raster
        raster = data[pos : pos + count]
        if len(raster) < count:
            raise MalformedHeader(f"{path}: truncated raster")
        pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        values = []
        for _ in range(count):
            token, pos = _next_token(data, pos)
            try:
                values.append(int(token))
            except ValueError as exc:
                raise MalformedHeader(f"{path}: bad sample {token!r}") from exc
        pixels = np.array(values, dtype=np.float64)
    return pixels.reshape(height, width)


def write_pgm(path, image) -> None:
    """Write binary P5; pixels clipped to [0, 255], rounded half away from zero."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeMismatch(f"expected 2-D image, got {img.shape}")
    quantized = np.floor(np.clip(img, 0.0, 255.0) + 0.5).astype(np.uint8)
    height, width = img.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(quantized.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _field(value, fmt=".17g") -> str:
    return "" if value is None else format(value, fmt)


def write_trace_csv(path, trace: IterationTrace) -> None:
    """Serialize a trace; absent values become empty fields."""
    if not trace.records:
        raise ValueError("refusing to write an empty trace")
    lines = ["iter,cost,psnr,step_norm,gamma_abs_sum,elapsed_s"]
    for r in trace.records:
        lines.append(
            f"{r.iter},{_field(r.cost)},{_field(r.psnr)},"
            f"{_field(r.step_norm)},{_field(r.gamma_abs_sum)},{r.elapsed_s:.6f}"
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Experiment wiring
# ---------------------------------------------------------------------------


def _run_lindemo() -> int:
    print("linear fixed-point extrapolation: relative residual vs direct solve")
    problems = []
    problems.append(
        ("diag(0.5, 0.25)", LinearFixedPointProblem(np.diag([0.5, 0.25]), np.array([1.0, 3.0])), 2)
    )
    rng = np.random.default_rng(7)
    basis, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    a6 = basis @ np.diag([0.9, 0.9, 0.5, 0.5, 0.1, 0.1]) @ basis.T
    problems.append(("6x6, three eigenvalues", LinearFixedPointProblem(a6, rng.standard_normal(6)), 3))
    for label, lin, kappa in problems:
        star = lin.solve()
        x = np.zeros_like(lin.b)
        iterates = [x]
        for _ in range(kappa + 1):
            x = lin.step(x)
            iterates.append(x)
        window = ve.VectorSequenceWindow.from_iterates(iterates)
        for method in ve.METHODS:
            result = ve.extrapolate_once(window, method)
            rel = np.linalg.norm(result.vector - star) / np.linalg.norm(star)
            print(f"  {label:24s} {method:7s} residual {rel:.3e}")
    return 0


def _run_check_denoiser() -> int:
    img = synthetic_image(32)
    engines = [Identity(), GaussianFilter(), PatchWeighted()]
    for engine in engines:
        dev = check_local_homogeneity(engine, img, 1.001)
        rho = check_passivity(engine, img, iterations=15)
        print(f"{engine.name}: homogeneity_deviation={dev:.3e} passivity_estimate={rho:.6f}")
    return 0


def run_experiment(config: ExperimentConfig) -> int:
    """Execute one experiment; returns a process exit status (0 = success)."""
    if config.task == "lindemo":
        return _run_lindemo()
    if config.task == "check-denoiser":
        return _run_check_denoiser()

    start = time.perf_counter()
    truth = read_pgm(config.input)
    operator = task_operator(config.task, truth.shape)
    measurement = degrade(truth, operator, config.sigma, config.seed)
    objective = RedObjective(
        forward=operator,
        y=measurement,
        sigma=config.sigma,
        alpha=config.alpha,
        denoiser=task_denoiser(config.task),
    )
    problem = as_fixed_point_problem(objective, reference=truth)
    if config.task == "superres":
        x0 = operator.adjoint(measurement)  # zero-filled adjoint initialization
    else:
        x0 = measurement
    solution, trace = solve(problem, x0.ravel(), config.solve)
    restored = solution.reshape(truth.shape)

    os.makedirs(config.output_dir, exist_ok=True)
    write_pgm(os.path.join(config.output_dir, "degraded.pgm"), measurement)
    write_pgm(os.path.join(config.output_dir, "restored.pgm"), restored)
    if config.trace_path:
        write_trace_csv(config.trace_path, trace)

    final_cost = objective.cost(restored)
    final_psnr = psnr(restored, truth)
    elapsed = time.perf_counter() - start
    print(f"{config.method} {trace.inner_steps} {final_cost:.12g} {final_psnr:.4f} {elapsed:.3f}")
    return 0


def main(argv=None) -> int:
    try:
        config = parse_args(argv if argv is not None else sys.argv[1:])
        return run_experiment(config)
    except (UsageError, KernelTooLarge, InvalidSize, ShapeMismatch) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (MalformedHeader, UnsupportedMaxval, IoFailure, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except (NonFiniteIterate, CgNoConvergence, ve.NoConvergence, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
