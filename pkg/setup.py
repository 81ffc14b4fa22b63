#!/usr/bin/env python3
"""
Setup script for wexpand
Installs the Python dependencies and checks that the toolkit imports cleanly
"""

import sys
import subprocess
import platform
from pathlib import Path

# Fix Windows encoding issues
if platform.system() == "Windows":
    if sys.stdout.encoding != 'utf-8':
        sys.stdout.reconfigure(encoding='utf-8')
    if sys.stderr.encoding != 'utf-8':
        sys.stderr.reconfigure(encoding='utf-8')

REQUIRED_IMPORTS = ["numpy", "scipy", "tabulate", "pytest"]
TOOLKIT_MODULES = ["modules.statevector", "modules.gates", "modules.schemes", "modules.analysis"]


class SetupInstaller:
    """Handles installation of required packages"""

    def __init__(self):
        self.system = platform.system()
        self.project_root = Path(__file__).parent

    def run_command(self, command, check=True):
        """Run a command"""
        try:
            result = subprocess.run(
                command,
                check=check,
                capture_output=True,
                text=True,
                cwd=self.project_root,
            )
            return result.returncode == 0, result.stdout, result.stderr
        except subprocess.CalledProcessError as e:
            return False, e.stdout, e.stderr

    def install_python_deps(self, upgrade_pip=True):
        """Install Python dependencies"""
        print("\n📦 Installing Python dependencies...")
        if upgrade_pip:
            success, _, stderr = self.run_command([sys.executable, "-m", "pip", "install", "--upgrade", "pip"])
            if not success:
                print(f"⚠️  Warning: Failed to upgrade pip: {stderr}")

        requirements_file = self.project_root / "requirements.txt"
        if not requirements_file.exists():
            print("❌ requirements.txt not found")
            return False

        success, _, stderr = self.run_command([sys.executable, "-m", "pip", "install", "-r", str(requirements_file)])
        if success:
            print("✅ Python dependencies installed successfully")
        else:
            print(f"❌ Failed to install Python dependencies: {stderr}")
        return success

    def verify_installations(self):
        """Import every dependency and toolkit module in a fresh interpreter"""
        print("\n🔍 Verifying installations...")
        all_ok = True
        for name in REQUIRED_IMPORTS + TOOLKIT_MODULES:
            success, _, stderr = self.run_command([sys.executable, "-c", f"import {name}"], check=False)
            if success:
                print(f"✅ {name}")
            else:
                last_line = stderr.strip().splitlines()[-1] if stderr.strip() else "import failed"
                print(f"❌ {name}: {last_line}")
                all_ok = False
        return all_ok

    def install_all(self, upgrade_pip=True):
        """Install and verify everything"""
        print("=" * 60)
        print("🚀 W-State Expansion Toolkit - Setup")
        print("=" * 60)

        installed = self.install_python_deps(upgrade_pip=upgrade_pip)
        verified = self.verify_installations()

        print("\n" + "=" * 60)
        if installed and verified:
            print("✅ Setup completed successfully!")
            print("\nNext steps:")
            print("1. Run the tests: pytest")
            print("2. Cross-validate the formulas: python scripts/wexpand.py validate --n 6")
            print("3. Double a W state: python scripts/wexpand.py run --scheme parallel --n 3")
        else:
            print("⚠️  Some steps failed. Install the missing packages manually:")
            print("   pip install -r requirements.txt")
        print("=" * 60)
        return installed and verified


def main():
    """Main entry point"""
    import argparse

    parser = argparse.ArgumentParser(description="Setup script for wexpand")
    parser.add_argument(
        "--skip-pip-upgrade",
        action="store_true",
        help="Do not upgrade pip before installing requirements"
    )
    args = parser.parse_args()

    installer = SetupInstaller()
    ok = installer.install_all(upgrade_pip=not args.skip_pip_upgrade)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
