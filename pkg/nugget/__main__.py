import json
import sys
import typing as t

from clypi import ClypiConfig, configure

from nugget._cli import Nugget
from nugget._exceptions import NuggetException, exit_code_of, format_reason, kind_of


def main(argv: t.Sequence[str] | None = None) -> int:
    # Let every error propagate to the handler below
    configure(ClypiConfig(nice_errors=()))
    error: NuggetException | None = None
    try:
        Nugget.parse(argv).start()
    except NuggetException as e:
        error = e
        reason = json.dumps(format_reason(e), ensure_ascii=False)
        sys.stderr.write(f"nugget: error={kind_of(e)} reason={reason}\n")
        sys.stderr.flush()
    return exit_code_of(error)


if __name__ == "__main__":
    sys.exit(main())
