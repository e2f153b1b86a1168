#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
RobustMoE - Main Orchestrator
Command-line interface for fitting, bandwidth selection, classification,
contamination and simulation workflows.
"""

import argparse
import os
import subprocess
import sys

# Fix Windows console encoding
if sys.platform == "win32":
    import codecs
    sys.stdout = codecs.getwriter("utf-8")(sys.stdout.buffer, "strict")
    sys.stderr = codecs.getwriter("utf-8")(sys.stderr.buffer, "strict")

SRC_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "src")
sys.path.insert(0, SRC_DIR)

from utils.run_config import add_run_arguments

EXIT_OK, EXIT_FIT_FAILURE, EXIT_USAGE = 0, 1, 2


# ANSI color codes for pretty output
class Colors:
    HEADER = '\033[95m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    END = '\033[0m'
    BOLD = '\033[1m'


def print_header(text):
    """Print a colored header."""
    print(f"\n{Colors.BOLD}{Colors.CYAN}{'='*60}{Colors.END}")
    print(f"{Colors.BOLD}{Colors.CYAN}{text.center(60)}{Colors.END}")
    print(f"{Colors.BOLD}{Colors.CYAN}{'='*60}{Colors.END}\n")


def print_success(text):
    print(f"{Colors.GREEN}✓ {text}{Colors.END}")


def print_error(text):
    print(f"{Colors.RED}✗ {text}{Colors.END}")


def print_info(text):
    print(f"{Colors.BLUE}ℹ {text}{Colors.END}")


def run_command(cmd, description):
    """Run a workflow script and return its exit code."""
    print_info(f"Running: {description}")
    print(f"{Colors.YELLOW}Command: {' '.join(cmd)}{Colors.END}\n")

    result = subprocess.run(cmd)
    if result.returncode == EXIT_OK:
        print_success(f"Completed: {description}")
    elif result.returncode == EXIT_FIT_FAILURE:
        print_error(f"Fit failed: {description}")
    else:
        print_error(f"Failed: {description} (exit code {result.returncode})")
    return result.returncode


# command -> (script, leading script argument, header, description)
WORKFLOWS = {
    "fit": ("fit_model.py", "fit", "📈 Fit Mixture of Experts", "Model fitting"),
    "classify": ("fit_model.py", "classify", "🏷  Classify Observations", "Cluster and outlier labelling"),
    "cv-bandwidth": ("cv_bandwidth.py", None, "📏 Cross-Validate Bandwidth", "Bandwidth selection"),
    "contaminate": ("contaminate.py", None, "🧪 Contaminate Dataset", "Response contamination"),
    "simulate": ("run_study.py", None, "🎲 Simulation Study", "Simulation study"),
}


def run_workflow(command, forwarded):
    """Run one workflow script with the original command-line options."""
    script, lead, header, description = WORKFLOWS[command]
    print_header(header)
    cmd = [sys.executable, os.path.join(SRC_DIR, script)]
    if lead:
        cmd.append(lead)
    return run_command(cmd + list(forwarded), description)


def build_parser():
    parser = argparse.ArgumentParser(
        description="RobustMoE - Robust mixtures of linear experts",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Fit the semi-parametric contaminated model with a fixed bandwidth
  python main.py fit --data data/tonedata.csv --y-col tuned --x-cols stretchratio --model scgmoe --h 0.1

  # Fit a parametric model with 10 restarts
  python main.py fit --data data/tonedata.csv --y-col tuned --x-cols stretchratio --model cgmlr --restarts 10

  # Choose the bandwidth by 5-fold cross-validation
  python main.py cv-bandwidth --data data/tonedata.csv --y-col tuned --x-cols stretchratio --h-grid 0.05,0.1,0.2

  # Export cluster labels and outlier flags
  python main.py classify --data data/tonedata.csv --y-col tuned --x-cols stretchratio --model cgmoe

  # Contaminate 5% of the responses by a factor 2.5
  python main.py contaminate --data data/tonedata.csv --y-col tuned --fraction 0.05 --factor 2.5

  # Small simulation study
  python main.py simulate --scenarios a,b --n-values 200 --models gmoe,scgmoe --reps 10
        """
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    helps = {
        "fit": "Fit a model and write report, curves and lines",
        "classify": "Fit a model and write cluster/outlier labels",
        "cv-bandwidth": "Cross-validate the kernel bandwidth",
        "contaminate": "Multiply a share of responses by a factor",
        "simulate": "Run the simulation study",
    }
    for command, text in helps.items():
        add_run_arguments(subparsers.add_parser(command, help=text), command)
    return parser


def main():
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(EXIT_OK)

    # Print banner
    print(f"\n{Colors.BOLD}{Colors.HEADER}")
    print("  ╔═══════════════════════════════════════════════╗")
    print("  ║      RobustMoE - Mixtures of Linear Experts   ║")
    print("  ╚═══════════════════════════════════════════════╝")
    print(f"{Colors.END}")

    forwarded = sys.argv[sys.argv.index(args.command) + 1:]
    sys.exit(run_workflow(args.command, forwarded))


if __name__ == "__main__":
    main()
