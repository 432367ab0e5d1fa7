"""
Comprehensive Test Suite
Smoke checks of every component; `python test_suite.py` prints the
summary and then runs the pytest suite
"""

import sys
from pathlib import Path

import pytest

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

import example  # noqa: E402
import setup_check  # noqa: E402


def check_imports():
    """Check if all core modules can be imported"""
    print("\n" + "="*60)
    print("TEST 1: Module Imports")
    print("="*60)

    tests_passed = 0
    tests_total = 0

    for module_name in setup_check.PROJECT_MODULES:
        tests_total += 1
        try:
            __import__(module_name)
            print(f"  ✅ {module_name}")
            tests_passed += 1
        except Exception as e:
            print(f"  ❌ {module_name}: {str(e)}")

    return tests_passed, tests_total


def check_config():
    """Check the configuration module"""
    print("\n" + "="*60)
    print("TEST 2: Configuration")
    print("="*60)

    tests_passed = 0
    tests_total = 0

    try:
        from config import PATH_BLOCK, SUITE_GAMMAS, get_run_defaults, validate_config

        tests_total += 1
        if PATH_BLOCK == 2500:
            print(f"  ✅ Path block: {PATH_BLOCK}")
            tests_passed += 1
        else:
            print(f"  ❌ Path block: expected 2500, got {PATH_BLOCK}")

        tests_total += 1
        if SUITE_GAMMAS == (0.5, 2.0):
            print(f"  ✅ Suite gammas: {SUITE_GAMMAS}")
            tests_passed += 1
        else:
            print(f"  ❌ Suite gammas: {SUITE_GAMMAS}")

        tests_total += 1
        errors = validate_config()
        if len(errors) == 0:
            print("  ✅ Configuration validation passed")
            tests_passed += 1
        else:
            print(f"  ❌ Configuration errors: {errors}")

        tests_total += 1
        defaults = get_run_defaults()
        if {'T', 'dt', 'n_paths', 'seed'} <= set(defaults):
            print(f"  ✅ Run defaults: T={defaults['T']:g}, dt={defaults['dt']:g}")
            tests_passed += 1
        else:
            print(f"  ❌ Run defaults incomplete: {sorted(defaults)}")

    except Exception as e:
        print(f"  ❌ Configuration test failed: {str(e)}")

    return tests_passed, tests_total


def check_closed_form():
    """Check the desk constants against their hand values"""
    print("\n" + "="*60)
    print("TEST 3: Closed-Form Solution")
    print("="*60)

    tests_passed = 0
    tests_total = 0

    try:
        consts, decision = example.example_closed_form()

        expected = {'beta': 0.04, 'nu': 100.0, 'f_inf': 101.0}
        for name, value in expected.items():
            tests_total += 1
            actual = getattr(consts, name)
            if abs(actual - value) <= 1e-9 * value:
                print(f"  ✅ {name} = {actual:g}")
                tests_passed += 1
            else:
                print(f"  ❌ {name}: expected {value:g}, got {actual:g}")

        tests_total += 1
        if decision.c > 0 and decision.B > 0:
            print("  ✅ Positive consumption and bequest target")
            tests_passed += 1
        else:
            print(f"  ❌ Controls not positive: c={decision.c}, B={decision.B}")

        tests_total += 1
        wedges = example.example_benchmark()
        if max(wedges.gamma_residual, wedges.theta_residual) <= 1e-12 and wedges.gamma_wedge > 0:
            print("  ✅ Benchmark wedges consistent")
            tests_passed += 1
        else:
            print(f"  ❌ Benchmark wedges: {wedges}")

    except Exception as e:
        print(f"  ❌ Closed-form test failed: {str(e)}")

    return tests_passed, tests_total


def check_monte_carlo():
    """Check the value function on the deterministic baseline"""
    print("\n" + "="*60)
    print("TEST 4: Monte Carlo (Quick Test)")
    print("="*60)

    tests_passed = 0
    tests_total = 0

    try:
        results = example.example_value_check()
        for gamma, check in results.items():
            tests_total += 1
            if check.passed:
                print(f"  ✅ gamma={gamma:g} within tolerance")
                tests_passed += 1
            else:
                print(f"  ❌ gamma={gamma:g}: {check.to_row()}")
    except Exception as e:
        print(f"  ❌ Monte Carlo test failed: {str(e)}")

    return tests_passed, tests_total


def check_setup():
    """Check the environment verification helpers"""
    print("\n" + "="*60)
    print("TEST 5: Setup Verification")
    print("="*60)

    tests_passed = 0
    tests_total = 0

    for name, ok in (('Dependencies', setup_check.check_dependencies()),
                     ('Scenarios', setup_check.check_scenarios())):
        tests_total += 1
        if ok:
            print(f"  ✅ {name}")
            tests_passed += 1
        else:
            print(f"  ❌ {name}")

    return tests_passed, tests_total


SMOKE_CHECKS = {
    'Imports': check_imports,
    'Configuration': check_config,
    'Closed Form': check_closed_form,
    'Monte Carlo': check_monte_carlo,
    'Setup': check_setup,
}


@pytest.mark.parametrize('name', list(SMOKE_CHECKS))
def test_smoke(name):
    passed, total = SMOKE_CHECKS[name]()
    assert total > 0
    assert passed == total


def print_summary(all_results):
    """Print test summary"""
    print("\n" + "="*60)
    print("TEST SUMMARY")
    print("="*60)

    total_passed = 0
    total_tests = 0

    for test_name, (passed, total) in all_results.items():
        total_passed += passed
        total_tests += total
        pct = (passed / total * 100) if total > 0 else 0
        status = "✅" if passed == total else "⚠️"
        print(f"{status} {test_name}: {passed}/{total} ({pct:.0f}%)")

    print("-"*60)
    overall_pct = (total_passed / total_tests * 100) if total_tests > 0 else 0
    print(f"OVERALL: {total_passed}/{total_tests} smoke checks passed ({overall_pct:.0f}%)")
    print("="*60)

    return 0 if total_passed == total_tests else 1


def main(pytest_args=('-q', '-m', 'not slow')):
    """Run the smoke checks, then the pytest suite"""
    print("\n")
    print("╔" + "═"*58 + "╗")
    print("║" + " "*58 + "║")
    print("║" + "  DELAY MERTON LAB - TEST SUITE".center(58) + "║")
    print("║" + " "*58 + "║")
    print("╚" + "═"*58 + "╝")

    results = {name: check() for name, check in SMOKE_CHECKS.items()}
    status = print_summary(results)
    if status:
        print("❌ Smoke checks failed. Fix issues before running the full suite.")
        return status

    print("\nRunning pytest " + " ".join(pytest_args))
    return int(pytest.main([str(Path(__file__).parent), *pytest_args]))


if __name__ == "__main__":
    sys.exit(main(tuple(sys.argv[1:]) or ('-q', '-m', 'not slow')))
