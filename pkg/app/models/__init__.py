# Models Package (Domänentypen)
