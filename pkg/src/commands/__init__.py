# one module per cli subcommand
