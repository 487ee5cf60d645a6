"""Regular register emulation under mobile Byzantine agents: simulator, checkers, bounds."""
