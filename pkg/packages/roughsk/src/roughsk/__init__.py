import sys

import click
import typer
from common.logger import get_logger
from dotenv import load_dotenv

from roughsk.commands.average import average as average_cmd
from roughsk.commands.check import check as check_cmd
from roughsk.commands.converge import converge as converge_cmd
from roughsk.commands.holder import holder as holder_cmd
from roughsk.commands.simulate import simulate as simulate_cmd
from roughsk.core.exceptions import ConfigError, RoughSKError

load_dotenv()

logger = get_logger(__name__)

app = typer.Typer(no_args_is_help=True, pretty_exceptions_show_locals=False)

app.command()(simulate_cmd)
app.command()(converge_cmd)
app.command()(holder_cmd)
app.command()(average_cmd)
app.command()(check_cmd)


def cli_main(argv: list[str] | None = None) -> int:
    """
    Run the CLI and map outcomes to exit codes: 0 success, 1 usage or
    configuration error, 2 runtime failure.
    """
    try:
        result = app(args=argv, prog_name="roughsk", standalone_mode=False)
    except click.exceptions.Abort:
        logger.error("Aborted")
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 1
    except RoughSKError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2
    except Exception as e:
        logger.error(f"Unexpected failure: {type(e).__name__}: {e}", exc_info=True)
        return 2
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
