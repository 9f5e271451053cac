"""Model files, VTK output, CSV tables and run manifests."""
