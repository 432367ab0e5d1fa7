"""
Example Usage Script
Demonstrates the delayed-income Merton solution programmatically
"""

import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from config import SCENARIO_DIR, print_config
from income_sdde import IncomeState
from model_params import ZeroKernel, derive_constants
from objective_mc import value_check, value_function
from policy_engine import benchmark_wedges, feedback
from scenario import load_scenario
from valuation import human_capital, human_capital_components

DESK = SCENARIO_DIR / 'desk_constant_kernel.toml'
BASELINE = SCENARIO_DIR / 'baseline_zero_kernel.toml'


def example_closed_form(path=DESK):
    """
    Example 1: Constants and optimal controls at the initial state
    """
    print("\n" + "="*60)
    print("EXAMPLE 1: Closed-Form Solution")
    print("="*60)

    scenario = load_scenario(path)
    consts = derive_constants(scenario.params)
    state = IncomeState.initial(scenario.x0, scenario.x1, scenario.params.income)

    print(f"\n  Scenario: {scenario.name}")
    print(f"    beta: {consts.beta:.6f}   beta_inf: {consts.beta_inf:.6f}")
    print(f"    g_inf: {consts.g_inf:.4f}   nu: {consts.nu:.4f}   f_inf: {consts.f_inf:.4f}")

    current, past = human_capital_components(state, consts)
    hc = past + current
    print(f"\n  Human capital: {hc:.4f} (current income {current:.4f}, past income {past:.4f})")

    decision = feedback(scenario.w, state, consts)
    print(f"    Consumption c: {decision.c:.6f}")
    print(f"    Bequest target B: {decision.B:.6f}")
    print(f"    Risky allocation: {decision.theta} (Merton {decision.merton}, hedge {decision.hedge})")
    print(f"    Value V: {value_function(scenario.w, state, consts):.6f}")
    return consts, decision


def example_benchmark(path=DESK):
    """
    Example 2: What the delay adds over the same income without memory
    """
    print("\n" + "="*60)
    print("EXAMPLE 2: No-Delay Benchmark")
    print("="*60)

    scenario = load_scenario(path)
    consts = derive_constants(scenario.params)
    zero = derive_constants(scenario.params.with_kernel(ZeroKernel()))
    state = IncomeState.initial(scenario.x0, scenario.x1, scenario.params.income)

    wedges = benchmark_wedges(scenario.w, state, consts, zero)
    print(f"\n  Human capital with memory: {human_capital(state, consts):.4f}")
    print(f"  Human capital without:     {human_capital(state, zero):.4f}")
    print(f"  Total wealth wedge: {wedges.gamma_wedge:.6f}")
    print(f"  Allocation wedge: {wedges.theta_wedge}")
    return wedges


def example_value_check(path=BASELINE, T=100.0, dt=0.04, n_paths=4):
    """
    Example 3: Monte Carlo objective under the optimal feedback vs V
    """
    print("\n" + "="*60)
    print("EXAMPLE 3: Value Function Check")
    print("="*60)

    scenario = load_scenario(path)
    results = {}
    for gamma in (0.5, 2.0):
        params = scenario.params.with_gamma(gamma)
        check = value_check(params, scenario.w, scenario.x0, scenario.x1, T, dt, n_paths,
                            scenario.run.seed)
        results[gamma] = check
        status = "✅" if check.passed else "❌"
        print(f"  {status} gamma={gamma:g}: V={check.V:.6f}  MC={check.estimate.mean:.6f} "
              f"± {check.estimate.stderr:.2g}  (tail bound {check.estimate.truncation_bound:.2g})")
    return results


if __name__ == "__main__":
    print("\n")
    print("╔" + "═"*58 + "╗")
    print("║" + " "*58 + "║")
    print("║" + "  DELAY MERTON LAB - EXAMPLES".center(58) + "║")
    print("║" + " "*58 + "║")
    print("╚" + "═"*58 + "╝")

    print_config()

    try:
        example_closed_form()
        example_benchmark()
        example_value_check()

        print("\n" + "="*60)
        print("✅ Examples completed!")
        print("="*60)
        print("\nTo run the full acceptance suite:")
        print("  python cli.py suite scenarios/desk_constant_kernel.toml")
        print()

    except KeyboardInterrupt:
        print("\n\n⚠️ Examples interrupted by user")

    except Exception as e:
        print(f"\n❌ Error: {str(e)}")
        import traceback
        traceback.print_exc()
