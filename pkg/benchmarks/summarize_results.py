"""Summarize a pytest-benchmark JSON file against the asserted upper bounds."""
import json
import sys
from pathlib import Path

# Upper bounds (seconds) asserted in tests/performance/test_benchmarks.py
UPPER_BOUNDS = {
    "test_gradient_suite": 10.0,
    "test_calibrate_uncertainty": 5.0,
    "test_uamtfl_loss_and_backward": 0.1,
    "test_short_training_run": 5.0,
}


def _format_seconds(value: float) -> str:
    if value < 1e-3:
        return f"{value * 1e6:.0f} μs"
    if value < 1.0:
        return f"{value * 1e3:.1f} ms"
    return f"{value:.2f} s"


def generate_summary(path: Path) -> int:
    """Print one line per benchmark; return 1 if any mean exceeds its bound."""
    results = json.loads(path.read_text())

    print("=" * 60)
    print("📊 PERFORMANCE BENCHMARK SUMMARY")
    print("=" * 60)

    over = 0
    for bench in results.get("benchmarks", []):
        name = bench["name"]
        mean = bench["stats"]["mean"]
        bound = UPPER_BOUNDS.get(name)
        if bound is None:
            print(f"  ℹ️  {name}: {_format_seconds(mean)}")
        elif mean <= bound:
            print(f"  ✅ {name}: {_format_seconds(mean)} (bound {_format_seconds(bound)})")
        else:
            over += 1
            print(f"  ❌ {name}: {_format_seconds(mean)} (bound {_format_seconds(bound)})")

    missing = sorted(set(UPPER_BOUNDS) - {b["name"] for b in results.get("benchmarks", [])})
    if missing:
        print(f"\n⚠️  Not run: {', '.join(missing)}")

    print("\n" + "=" * 60)
    return 1 if over else 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: summarize_results.py <benchmark.json>")
        sys.exit(2)
    sys.exit(generate_summary(Path(sys.argv[1])))
