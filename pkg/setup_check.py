"""
Quick Start & Setup Verification Script
Validates the installation, configuration and bundled scenarios
"""

import sys
from pathlib import Path

PROJECT_DIR = Path(__file__).resolve().parent

REQUIRED_PACKAGES = [
    ('numpy', 'numpy'),
    ('pandas', 'pandas'),
    ('scipy', 'scipy'),
    ('python-dotenv', 'dotenv'),
]

OPTIONAL_PACKAGES = [
    ('pytest', 'pytest'),
    ('hypothesis', 'hypothesis'),
]

PROJECT_MODULES = [
    'config',
    'errors',
    'quadrature',
    'model_params',
    'montecarlo',
    'income_sdde',
    'valuation',
    'policy_engine',
    'objective_mc',
    'scenario',
    'reporting',
    'acceptance',
    'cli',
]


def print_header(text):
    """Print a formatted header"""
    print("\n" + "="*60)
    print(f"  {text}")
    print("="*60)


def check_python_version():
    """Check if Python version is compatible"""
    print(f"\n📍 Python Version: {sys.version}")

    if sys.version_info < (3, 10):
        print("❌ Python 3.10+ required")
        return False

    if sys.version_info < (3, 11):
        print("✅ Python version compatible (TOML scenarios need the tomli package)")
        return check_package('tomli', 'tomli')

    print("✅ Python version compatible")
    return True


def check_package(package_name, import_name=None):
    """Check if a package is installed"""
    if import_name is None:
        import_name = package_name.lower()

    try:
        __import__(import_name)
        print(f"✅ {package_name}")
        return True
    except ImportError:
        print(f"❌ {package_name} - NOT INSTALLED")
        return False


def check_dependencies():
    """Check if all dependencies are installed"""
    print_header("Checking Dependencies")

    print("\nRequired Packages:")
    required_ok = all([check_package(name, imp) for name, imp in REQUIRED_PACKAGES])

    print("\nTest Packages:")
    for name, imp in OPTIONAL_PACKAGES:
        check_package(name, imp)

    return required_ok


def check_modules():
    """Check if project modules can be imported"""
    print_header("Checking Project Modules")

    all_ok = True
    for module in PROJECT_MODULES:
        try:
            __import__(module)
            print(f"✅ {module}.py")
        except ImportError as e:
            print(f"❌ {module}.py - {str(e)}")
            all_ok = False

    return all_ok


def check_configuration():
    """Check the environment-resolved defaults"""
    print_header("Checking Configuration")

    from config import ENV_PREFIX, validate_config

    env_file = PROJECT_DIR / '.env'
    if env_file.exists():
        print(f"✅ .env file found ({ENV_PREFIX}* overrides apply)")
    else:
        print("ⓘ  No .env file, using built-in defaults")

    errors = validate_config()
    for error in errors:
        print(f"❌ {error}")
    if not errors:
        print("✅ Configuration validation passed")
    return not errors


def check_scenarios(scenario_dir=None):
    """Load every bundled scenario; the desk and baseline must pass the parameter gate"""
    print_header("Checking Scenarios")

    from config import SCENARIO_DIR
    from errors import DelayMertonError
    from scenario import load_scenario

    scenario_dir = Path(scenario_dir or SCENARIO_DIR)
    expected_ok = {'desk_constant_kernel.toml', 'baseline_zero_kernel.toml'}
    all_ok = True
    for path in sorted(scenario_dir.glob('*.toml')):
        try:
            report = load_scenario(path).check()
        except DelayMertonError as e:
            print(f"❌ {path.name} - {str(e)}")
            all_ok = False
            continue
        if report.ok:
            print(f"✅ {path.name}")
        elif path.name in expected_ok:
            print(f"❌ {path.name} - rejected: {'; '.join(report.lines())}")
            all_ok = False
        else:
            print(f"✅ {path.name} (rejected as intended)")

    missing = expected_ok - {p.name for p in scenario_dir.glob('*.toml')}
    for name in sorted(missing):
        print(f"❌ {name} - NOT FOUND")
        all_ok = False
    return all_ok


def print_next_steps():
    """Print next steps for user"""
    print_header("Next Steps")

    print("""
1. If dependencies are missing:
   pip install -r requirements.txt

2. Check the desk scenario:
   python cli.py validate scenarios/desk_constant_kernel.toml

3. Run the walkthrough:
   python example.py

4. Run the acceptance suite (reduce --paths for a quick look):
   python cli.py suite scenarios/desk_constant_kernel.toml --paths 2000

5. Run the tests:
   pytest -m "not slow"

📖 Quick reference: See QUICKSTART.md
    """)


def main():
    """Main setup verification"""
    print_header("DELAY MERTON LAB - SETUP VERIFICATION")

    results = []

    results.append(("Python Version", check_python_version()))
    results.append(("Dependencies", check_dependencies()))
    results.append(("Project Modules", check_modules()))

    if results[1][1] and results[2][1]:
        results.append(("Configuration", check_configuration()))
        results.append(("Scenarios", check_scenarios()))

    print_header("Setup Summary")

    for check_name, status in results:
        status_icon = "✅" if status else "⚠️"
        print(f"{status_icon} {check_name}")

    all_ok = all(status for _, status in results)

    if all_ok:
        print("\n✅ All checks passed! Installation looks good.")
        print_next_steps()
    else:
        print("\n⚠️  Some issues detected. Please fix them before running the harness.")
        print("\nTo install missing dependencies:")
        print("  pip install -r requirements.txt")
        print("\nFor more details, see README.md")

    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
