import argparse
import logging
import os
import sys

# --- Setup Paths ---
try:
    ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
except NameError:
    ROOT_PATH = os.path.abspath('.')

sys.path.insert(0, ROOT_PATH)

# --- Import Your Modules ---
try:
    from engine.adapt import TransferError
    from engine.assembly import AssemblyError
    from engine.bench import bench_compare, format_report
    from engine.config import ConfigError, apply_overrides, load_config
    from engine.dendrite import TipNotFoundError
    from engine.lagrange_basis import QuadratureError
    from engine.linalg import SolverError
    from engine.output import OutputError
    from engine.runner import run_config
    from engine.simplicial_mesh import (
        MeshError, check_refinement_compatibility, load_macro_mesh,
    )
except ImportError as e:
    print(f"❌ CRITICAL IMPORT ERROR: {e}")
    print(f"Make sure the 'engine' package is in '{ROOT_PATH}' and numpy/scipy are installed.")
    sys.exit(1)

logger = logging.getLogger("multimesh")

# Errors reported as one line with exit status 1
KNOWN_ERRORS = (ConfigError, MeshError, AssemblyError, QuadratureError, SolverError,
                TransferError, TipNotFoundError, OutputError, OSError)
# -----------------------------------------------


class MultiMeshApp:
    """
    Command-line application around the multi-mesh engine.

    - ``run``: executes one configured problem and writes CSV/VTK output.
    - ``bench``: runs the same configuration in single- and multi-mesh mode.
    - ``check-mesh``: validates a macro-mesh file.
    """

    def __init__(self, args):
        """
        :param args: Parsed argparse namespace.
        """
        self.args = args
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )

    def load(self):
        """Loads the configuration and applies the command-line overrides."""
        config = load_config(self.args.config)
        return apply_overrides(config, {
            "output.dir": self.args.output_dir,
            "problem.seed": self.args.seed,
            "problem.mode": self.args.mode,
        })

    def run(self):
        config = self.load()
        print(f"Running {config.problem} ({config.mode} mesh) from {self.args.config}...")
        summary = run_config(config, max_steps=self.args.max_steps,
                             callback=self._progress if self.args.verbose else None)

        print("\n" + "=" * 30)
        print(f"✅ {summary.problem} finished: {summary.steps} steps, t = {summary.time:.6g}")
        print("=" * 30)
        for component, dofs in summary.dofs.items():
            print(f"  > {component}: {dofs} dofs")
        for group, leaves in summary.leaves.items():
            print(f"  > mesh {group}: {leaves} leaves")
        if summary.csv_path:
            print(f"  > CSV: {summary.csv_path}")
        if summary.vtk_files:
            print(f"  > VTK: {len(summary.vtk_files)} files in {config.output.dir}")
        if summary.eddies:
            print("Eddy centres (x, y, psi):")
            for eddy in summary.eddies:
                print(f"  ({eddy.x:.4f}, {eddy.y:.4f})  psi = {eddy.psi:.4e}")
        return 0

    def bench(self):
        config = self.load()
        print(f"Benchmarking {config.problem}: single vs multi mesh...")
        report = bench_compare(config, max_steps=self.args.max_steps, identical=self.args.identical)
        print("\n" + format_report(report))
        return 0

    def check_mesh(self):
        macro = load_macro_mesh(self.args.mesh, check_compatibility=False)
        try:
            check_refinement_compatibility(macro)
            compatible = True
        except MeshError as e:
            logger.warning("%s", e)
            compatible = False
        print(f"Macro mesh {self.args.mesh}")
        print(f"  > dimension:  {macro.dim}")
        print(f"  > elements:   {macro.num_elements}")
        print(f"  > vertices:   {macro.num_vertices}")
        print(f"  > measure:    {macro.total_volume():.12g}")
        print(f"  > markers:    {macro.markers}")
        print(f"  > refinement: {'✅ compatible' if compatible else '❌ propagation does not terminate'}")
        return 0 if compatible else 1

    @staticmethod
    def _progress(problem, record):
        dofs = ", ".join(f"{c}={record[f'dofs_{c}']}" for c in problem.components)
        print(f"  step {record['step']:>5}  t={record['time']:.4g}  {dofs}")

    def dispatch(self):
        handlers = {"run": self.run, "bench": self.bench, "check-mesh": self.check_mesh}
        try:
            return handlers[self.args.command]()
        except KNOWN_ERRORS as e:
            print(f"❌ ERROR: {e}")
            return 1


def build_parser():
    parser = argparse.ArgumentParser(prog="multimesh", description="Adaptive multi-mesh finite elements")
    parser.add_argument("--verbose", action="store_true", help="debug logging and per-step progress")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "run one configured problem"),
                            ("bench", "compare single- and multi-mesh runs")):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="configuration file")
        sub.add_argument("--output-dir", help="overrides output.dir")
        sub.add_argument("--seed", type=int, help="overrides problem.seed")
        sub.add_argument("--mode", choices=("single", "multi"), help="overrides problem.mode")
        sub.add_argument("--max-steps", type=int, help="stop after this many steps")
        if name == "bench":
            sub.add_argument("--identical", action="store_true",
                             help="force identical meshes on the multi-mesh side")

    check = commands.add_parser("check-mesh", help="validate a macro-mesh file")
    check.add_argument("mesh", help="macro-mesh file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return MultiMeshApp(args).dispatch()


# --- Application Entry Point ---
if __name__ == "__main__":
    sys.exit(main())
