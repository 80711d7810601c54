"""
Experiment file validation.

Checks that an experiment file parses, that the window, lattice, jitter and
grid it describes can be built, that the configured frame bounds exist and
that the oracle's test subspace sits inside the discretized system.
"""

import os
import sys
from typing import Dict, Optional, Tuple

import django
from dotenv import load_dotenv


def load_settings() -> None:
    """Load .env.local when present and set up Django."""
    env_path = ".env.local"
    if os.path.exists(env_path):
        load_dotenv(env_path)
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "jitterbench.settings")
    django.setup()


def validate_schema(path: str) -> Tuple[bool, str, Dict, Optional[object]]:
    """
    Parse and validate the experiment file.

    Returns:
        Tuple of (success, message, details, config)
    """
    from frames.exceptions import ConfigError
    from frames.experiments import load_config

    try:
        config = load_config(path)
    except ConfigError as e:
        return False, "Experiment file is invalid", {f"issue {i + 1}": d for i, d in enumerate(e.diagnostics)}, None
    details = {
        "name": config.name,
        "tasks": ", ".join(task["type"] for task in config.tasks),
    }
    return True, "Experiment file parsed and validated", details, config


def validate_objects(config) -> Tuple[bool, str, Dict, Optional[object]]:
    """Build the window, lattice, jitter pattern, grid and test subspace."""
    from frames.exceptions import ConfigError
    from frames.experiments import effective_seed, prepare

    try:
        context = prepare(config, effective_seed(config))
    except ConfigError as e:
        return False, "Experiment objects cannot be built", {f"issue {i + 1}": d for i, d in enumerate(e.diagnostics)}, None
    details = {
        "window": context.window.label,
        "density ab": context.lattice.a * context.lattice.b,
        "jitter": f"{context.pattern.shape.value} (max |delta| = {context.pattern.max_abs:g})",
        "grid step": context.grid.dx,
    }
    return True, "Window, lattice, jitter and grid built", details, context


def validate_bounds(context) -> Tuple[bool, str, Dict]:
    """Compute the configured frame bounds."""
    try:
        bounds = context.bounds_for(context.window, context.lattice)
    except (ValueError, ArithmeticError) as e:
        return False, f"Frame bounds unavailable: {e}", {"method": context.config.bounds["method"]}
    return True, "Frame bounds computed", {"A": bounds.A, "B": bounds.B,
                                            "provenance": bounds.provenance.value}


def validate_oracle(context) -> Tuple[bool, str, Dict]:
    """Discretize the system and check the test subspace is interior."""
    from frames.numerics import discretize, interior_condition

    oracle = context.config.oracle
    try:
        system = discretize(context.window, context.lattice, context.pattern, context.grid,
                            domain=oracle["domain"], half_width=oracle.get("half_width"))
    except (ValueError, ArithmeticError) as e:
        return False, f"Oracle system cannot be discretized: {e}", {"domain": oracle["domain"]}
    details = {"atoms": system.num_atoms, "domain": system.domain}
    if not interior_condition(system, context.subspace):
        return False, "Test subspace is not interior to the truncated system", details
    return True, "Oracle test subspace is interior", details


def validate_experiment():
    """
    Main function to validate an experiment file.
    This function is called by the CLI command.
    """
    if len(sys.argv) < 2:
        print("Usage: validate-experiment <experiment.json>")
        sys.exit(1)
    path = sys.argv[1]
    load_settings()

    print(f"🔍 Validating experiment file {path}...")
    print()

    results = []

    def report(name, success, message, details):
        print(f"Checking {name}...")
        results.append((name, success))
        if success:
            print(f"  ✅ {message}")
            for key, value in details.items():
                print(f"     • {key}: {value}")
        else:
            print(f"  ❌ {message}")
            if details:
                print("     Details:")
                for key, value in details.items():
                    print(f"     • {key}: {value}")
        print()

    success, message, details, config = validate_schema(path)
    report("schema", success, message, details)
    if config is not None:
        success, message, details, context = validate_objects(config)
        report("objects", success, message, details)
        if context is not None:
            report("bounds", *validate_bounds(context))
            report("oracle", *validate_oracle(context))

    passed_count = sum(1 for _, success in results if success)
    total_count = len(results)
    all_passed = passed_count == total_count

    print("=" * 50)
    if all_passed:
        print(f"🎉 All {total_count} experiment checks passed!")
    else:
        print(f"⚠️  {passed_count}/{total_count} experiment checks passed.")
        print(f"   {total_count - passed_count} check(s) failed.")
        print()
        print("Please fix the experiment file and run this command again.")
        sys.exit(1)


if __name__ == "__main__":
    validate_experiment()
