"""
Script test runner for the Kou engine test modules
Runs every test_* function of a module and prints a pass/fail summary
"""

import sys
import traceback
from pathlib import Path
from typing import Callable, Dict

# Add parent directory to path
sys.path.append(str(Path(__file__).parent.parent))


def expect_raises(exc_type, fn: Callable, *args, **kwargs):
    """Call fn and return the raised exception; fail if nothing (or something else) is raised"""
    try:
        fn(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(f"{getattr(fn, '__name__', fn)} did not raise {exc_type.__name__}")


def run_tests(title: str, namespace: Dict[str, object]) -> int:
    """Run the module's test_* functions in definition order; returns an exit code"""
    results = {'passed': 0, 'failed': 0, 'errors': []}
    tests = [(name, obj) for name, obj in namespace.items()
             if name.startswith('test_') and callable(obj)]

    print(f"🔍 {title}")
    print("=" * 60)
    for name, test in tests:
        try:
            test()
            results['passed'] += 1
            print(f"✅ {name}: PASSED")
        except Exception as e:
            results['failed'] += 1
            results['errors'].append(f"{name}: FAILED - {e!r}")
            print(f"❌ {name}: FAILED - {e!r}")
            traceback.print_exc()

    print("=" * 60)
    total = results['passed'] + results['failed']
    print(f"Passed: {results['passed']}/{total}")
    if results['errors']:
        print("\n❌ FAILED TESTS:")
        for error in results['errors']:
            print(f"  - {error}")
        return 1
    print("\n✅ All tests passed!")
    return 0
