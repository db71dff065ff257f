# errors and cli helpers
