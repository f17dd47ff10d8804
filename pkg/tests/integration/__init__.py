"""CLI and pipeline tests that write to the filesystem."""
