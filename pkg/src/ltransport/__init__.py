"""Linear transports along paths: torsion, curvature and their identities."""
