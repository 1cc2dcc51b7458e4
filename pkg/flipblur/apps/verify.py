"""
Run the operator oracle checks and print a pass/fail table.
"""

import argparse
from typing import Iterable, List, Optional

from flipblur.apps.common import add_verbosity_argument, run_main
from flipblur.lib.errors import UsageError, VerificationError
from flipblur.lib.log import get_logger
from flipblur.lib.verify import CheckResult, check_names, run_checks

logger = get_logger("flipblur-verify")


def format_table(results: List[CheckResult]) -> str:
    width = max((len(result.name) for result in results), default=5)
    lines = [f"{'check':<{width}}  status  detail"]
    for result in results:
        lines.append(f"{result.name:<{width}}  {'pass' if result.passed else 'FAIL':<6}  {result.detail}")
    return "\n".join(lines) + "\n"


def cmd_verify(names: Optional[Iterable[str]] = None) -> List[CheckResult]:
    """
    Run the checks (default: all) and print the table.

    Raises:
        UsageError: For an unknown check name.
        VerificationError: If any check fails.
    """
    try:
        results = run_checks(names)
    except KeyError as e:
        raise UsageError(f"unknown check {e.args[0]!r}; known checks: {', '.join(check_names())}", field="check")
    print(format_table(results), end="")
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise VerificationError(failed)
    return results


def main():
    """
    Entry point for the verify command.
    """
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("checks", nargs="*", help="Checks to run. Default: all")
    parser.add_argument("--list", action="store_true", help="List the checks and exit")
    add_verbosity_argument(parser)
    args = parser.parse_args()

    def command(args: argparse.Namespace):
        if args.list:
            print("\n".join(check_names()))
            return
        cmd_verify(args.checks or None)

    run_main(logger, args, command)


if __name__ == "__main__":
    main()
