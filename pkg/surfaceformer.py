#!/usr/bin/env python3
"""
SurfaceFormer - learned feature-preserving mesh denoising

This script is the command-line entry point for:
1. Denoising a mesh with a trained checkpoint and scoring the result
2. Training a model from (noisy, clean) mesh pairs
3. Inspecting patches and local surface descriptors
4. Synthesizing Gaussian-noise training meshes
"""

import argparse
import os
import sys
from typing import List, Optional

# Make sure we can find our packages
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from rich.console import Console
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)

# Import our modules
try:
    from src.descriptor.dump import write_lsd_dump
    from src.descriptor.lsd import build_patch_lsd
    from src.descriptor.normalization import normalize_patch
    from src.mesh.io import load_mesh, save_mesh
    from src.mesh.mesh import average_adjacent_center_distance
    from src.mesh.patching import Patch, generate_patches, grow_patch
    from src.model.config import PRESETS, ModelConfig
    from src.model.surfaceformer import SurfaceFormer
    from src.pipeline.denoise import denoise_mesh
    from src.pipeline.metrics import metric_ea, metric_ev
    from src.training.config import TrainConfig
    from src.training.noise import add_gaussian_noise
    from src.training.samples import load_training_set
    from src.training.trainer import train
    from src.utils.config import (
        DEFAULT_PATCH_FACES,
        DEFAULT_PRESET,
        DEFAULT_REFINE_ITERATIONS,
        DEFAULT_SEED,
        DEFAULT_WORKERS,
        get_config,
        validate_config,
    )
    from src.utils.error_handling import (
        EXIT_INPUT_ERROR,
        EXIT_SUCCESS,
        handle_error,
    )
    from src.utils.logging_config import setup_logging
    from src.utils.version import get_version, get_version_info
except ImportError as e:
    print(f"Error importing required modules: {e}", file=sys.stderr)
    print("Please install the requirements listed in requirements.txt.", file=sys.stderr)
    sys.exit(1)

# Status output goes to stderr; stdout carries command results only
console = Console(stderr=True)


def validate_environment() -> bool:
    """
    Validate that the environment is properly configured.

    Returns:
        True if the environment is valid, False otherwise
    """
    errors = validate_config()
    if errors:
        console.print("[bold red]Configuration Error:[/bold red]")
        for key, error in errors.items():
            console.print(f"  - {key}: {error}")
        console.print(
            "\n[yellow]Please check your .env file and fix these issues.[/yellow]"
        )
        return False
    return True


def display_welcome_banner() -> None:
    """Display a banner for long-running commands"""
    console.print(
        Panel.fit(
            f"[bold blue]SurfaceFormer {get_version()}[/bold blue]\n"
            "[italic]Feature-preserving mesh denoising[/italic]",
            border_style="blue",
            padding=(0, 4),
        )
    )


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.fields[status]}"),
        TimeElapsedColumn(),
        console=console,
    )


def run_denoise(args: argparse.Namespace) -> int:
    """
    Denoise a mesh and write the result.

    With ``--gt`` the noisy and denoised scores are printed; with
    ``--report-sweeps`` as well, the E_a gain of every refinement sweep.
    """
    display_welcome_banner()
    mesh = load_mesh(args.input)
    gt = load_mesh(args.gt) if args.gt else None

    sweep_callback = None
    if gt is not None and args.report_sweeps:
        previous = [None]

        def report_sweep(sweep: int, vertices) -> None:
            score = metric_ea(mesh.with_vertices(vertices), gt)
            gain = 0.0 if previous[0] is None else previous[0] - score
            previous[0] = score
            print(f"sweep {sweep} E_a={score:.6g} gain={gain:.6g}")

        sweep_callback = report_sweep

    with console.status("[cyan]Denoising...", spinner="dots"):
        result = denoise_mesh(
            mesh,
            args.ckpt,
            T_f=args.tf,
            N_v=args.nv,
            workers=args.workers,
            sweep_callback=sweep_callback,
        )
    save_mesh(result.mesh, args.output)
    console.print(
        f"[green]Denoised {mesh.n_faces} faces in {result.patch_count} patches; "
        f"saved to[/green] [blue]{args.output}[/blue]"
    )

    if gt is not None:
        print(f"noisy E_a={metric_ea(mesh, gt):.6g} E_v={metric_ev(mesh, gt):.6g}")
        print(
            f"denoised E_a={metric_ea(result.mesh, gt):.6g} "
            f"E_v={metric_ev(result.mesh, gt):.6g}"
        )
    return EXIT_SUCCESS


def run_eval(args: argparse.Namespace) -> int:
    """Print E_a and E_v of a denoised mesh against its ground truth."""
    denoised = load_mesh(args.denoised)
    gt = load_mesh(args.gt)
    print(f"E_a={metric_ea(denoised, gt):.6g} E_v={metric_ev(denoised, gt):.6g}")
    return EXIT_SUCCESS


def run_lsd(args: argparse.Namespace) -> int:
    """Dump the normalized descriptor of the patch grown around one face."""
    mesh = load_mesh(args.input)
    patch = Patch(
        center_face=args.face,
        faces=grow_patch(mesh, args.face, args.tf),
        mesh_ref=mesh.name,
    )
    d_a = average_adjacent_center_distance(mesh)
    lsd = build_patch_lsd(mesh, patch, d_a, args.ps, args.ts)
    normalized, ctx = normalize_patch(lsd, patch, mesh, center_fallback=True)
    write_lsd_dump(args.out, normalized, ctx)
    console.print(
        f"[green]Wrote descriptor of {patch.size} faces to[/green] [blue]{args.out}[/blue]"
    )
    return EXIT_SUCCESS


def run_patches(args: argparse.Namespace) -> int:
    """List the inference patches of a mesh."""
    mesh = load_mesh(args.input)
    for index, patch in enumerate(generate_patches(mesh, args.tf)):
        print(f"patch {index} center={patch.center_face} size={patch.size}")
    return EXIT_SUCCESS


def run_train(args: argparse.Namespace) -> int:
    """Train a model on the pairs listed in a manifest."""
    display_welcome_banner()
    model_config = ModelConfig.from_preset(
        args.preset,
        D=args.dim,
        L=args.layers,
        N_h=args.heads,
        p_s=args.ps,
        T_s=args.ts,
        T_f=args.tf,
        knn_k=args.knn,
    )
    train_config = TrainConfig.build(
        lr=args.lr,
        batch_size=args.batch,
        iterations=args.iters,
        alpha=args.alpha,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        augment=False if args.no_augment else None,
    )

    with console.status("[cyan]Building training samples...", spinner="dots"):
        samples = load_training_set(args.manifest, model_config, workers=args.workers)
    model = SurfaceFormer(model_config, seed=train_config.seed)
    console.print(
        f"[green]{len(samples)} samples, {model.parameter_count()} parameters[/green]"
    )

    with _progress() as progress:
        task = progress.add_task(
            "[cyan]Training...", total=train_config.iterations, status=""
        )

        def report(iteration: int, value: float) -> None:
            progress.update(task, completed=iteration, status=f"loss {value:.4g}")

        result = train(samples, train_config, model, args.out, progress=report)

    console.print(
        f"[green]Final loss {result.final_loss:.6g}; checkpoint saved to[/green] "
        f"[blue]{result.checkpoint_path}[/blue]"
    )
    return EXIT_SUCCESS


def run_noise(args: argparse.Namespace) -> int:
    """Write a Gaussian-noise copy of a mesh."""
    mesh = load_mesh(args.input)
    noisy = add_gaussian_noise(mesh, args.level, seed=args.seed)
    save_mesh(noisy, args.output)
    console.print(f"[green]Noisy mesh saved to[/green] [blue]{args.output}[/blue]")
    return EXIT_SUCCESS


def run_version(args: argparse.Namespace) -> int:
    info = get_version_info()
    print(f"SurfaceFormer version: {info['version']}")
    print(
        f"numpy {info['numpy_version']}, "
        f"Python {info['python_version']} on {info['platform']}"
    )
    return EXIT_SUCCESS


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser with one subcommand per task.

    Returns:
        The configured parser
    """
    parser = argparse.ArgumentParser(
        prog="surfaceformer",
        description="SurfaceFormer - learned feature-preserving mesh denoising",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug output")
    parser.add_argument(
        "--log-dir",
        default=get_config("SF_LOG_DIR"),
        help="Directory for the rotating log file (empty to disable)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    denoise = commands.add_parser("denoise", help="Denoise a mesh")
    denoise.add_argument("--input", required=True, help="Noisy mesh (.obj or .off)")
    denoise.add_argument("--ckpt", required=True, help="Trained checkpoint")
    denoise.add_argument("--output", required=True, help="Where to write the result")
    denoise.add_argument(
        "--nv", type=int, default=DEFAULT_REFINE_ITERATIONS, help="Refinement sweeps"
    )
    denoise.add_argument(
        "--tf", type=int, default=None, help="Patch size (the model's by default)"
    )
    denoise.add_argument("--gt", default=None, help="Ground-truth mesh to score against")
    denoise.add_argument(
        "--report-sweeps",
        action="store_true",
        help="Print the E_a gain of every refinement sweep (needs --gt)",
    )
    denoise.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    denoise.set_defaults(handler=run_denoise)

    evaluate = commands.add_parser("eval", help="Score a denoised mesh")
    evaluate.add_argument("--denoised", required=True)
    evaluate.add_argument("--gt", required=True)
    evaluate.set_defaults(handler=run_eval)

    lsd = commands.add_parser("lsd", help="Dump the descriptor of one face's patch")
    lsd.add_argument("--input", required=True)
    lsd.add_argument("--face", type=int, required=True)
    lsd.add_argument("--out", required=True)
    lsd.add_argument("--tf", type=int, default=DEFAULT_PATCH_FACES)
    lsd.add_argument("--ps", type=int, default=get_config("SF_SAMPLING_PRECISION"))
    lsd.add_argument("--ts", type=int, default=get_config("SF_GRID_HALF_SIDE"))
    lsd.set_defaults(handler=run_lsd)

    patches = commands.add_parser("patches", help="List the patches of a mesh")
    patches.add_argument("--input", required=True)
    patches.add_argument("--tf", type=int, default=DEFAULT_PATCH_FACES)
    patches.set_defaults(handler=run_patches)

    training = commands.add_parser("train", help="Train a model")
    training.add_argument("--manifest", required=True, help="File of 'noisy clean' pairs")
    training.add_argument("--out", required=True, help="Checkpoint path")
    training.add_argument("--preset", choices=sorted(PRESETS), default=DEFAULT_PRESET)
    training.add_argument("--iters", type=int, default=None)
    training.add_argument("--batch", type=int, default=None)
    training.add_argument("--seed", type=int, default=None)
    training.add_argument("--lr", type=float, default=None)
    training.add_argument("--alpha", type=float, default=None)
    training.add_argument("--checkpoint-every", type=int, default=None)
    training.add_argument("--no-augment", action="store_true")
    training.add_argument("--dim", type=int, default=None, help="Override D")
    training.add_argument("--layers", type=int, default=None, help="Override L")
    training.add_argument("--heads", type=int, default=None, help="Override N_h")
    training.add_argument("--ps", type=int, default=None)
    training.add_argument("--ts", type=int, default=None)
    training.add_argument("--tf", type=int, default=None)
    training.add_argument("--knn", type=int, default=None)
    training.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    training.set_defaults(handler=run_train)

    noise = commands.add_parser("noise", help="Add Gaussian vertex noise to a mesh")
    noise.add_argument("--input", required=True)
    noise.add_argument("--output", required=True)
    noise.add_argument("--level", type=float, required=True)
    noise.add_argument("--seed", type=int, default=DEFAULT_SEED)
    noise.set_defaults(handler=run_noise)

    version = commands.add_parser("version", help="Show version information")
    version.set_defaults(handler=run_version)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the application.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging("DEBUG" if args.debug else None, log_dir=args.log_dir or None)

    if not validate_environment():
        return EXIT_INPUT_ERROR

    try:
        return args.handler(args)
    except Exception as e:
        code = handle_error(e, {"command": args.command})
        console.print(f"[bold red]{e}[/bold red]")
        return code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted by user. Exiting...[/yellow]")
        sys.exit(130)
