# constants and defaults
