"""Pipeline steps behind the CLI commands."""
