import typer

from common.logger import configure_logger

QUIET_KEY = "common.quiet"


def quiet_callback(ctx: typer.Context, param: typer.CallbackParam, value: bool):
    """Eager, so the flag is recorded before the verbosity callback runs."""
    if ctx.resilient_parsing:
        return value

    ctx.meta[QUIET_KEY] = value
    if value:
        configure_logger(0, quiet=True)
    return value


def verbose_callback(ctx: typer.Context, param: typer.CallbackParam, value: int):
    if ctx.resilient_parsing:
        return value

    configure_logger(value, quiet=ctx.meta.get(QUIET_KEY, False))
    return value
