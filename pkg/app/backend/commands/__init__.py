"""CLI subcommands, one module per family."""

from app.backend.commands import groups, schema_command, simulate, test_command

COMMANDS = (test_command, simulate, groups, schema_command)
