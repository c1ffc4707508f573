"""Sidecar entry point; exits nonzero if the models cannot be loaded."""

from __future__ import annotations

import sys

import click

from .app import build_app
from .backends import BackendError, build_backend


@click.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=9090, show_default=True, envvar="TRAVSEG_SIDECAR_PORT")
@click.option("--backend", "backend_kind", default="transformers", show_default=True,
              type=click.Choice(["transformers", "hash"]),
              help="'transformers' serves real CLIPSeg/CLIP; 'hash' is the "
                   "deterministic offline stand-in.")
@click.option("--mask-model", default="CIDAS/clipseg-rd64-refined", show_default=True)
@click.option("--embed-model", default="openai/clip-vit-base-patch32", show_default=True)
@click.option("--device", default="cpu", show_default=True)
@click.option("--max-edge", default=512, show_default=True,
              help="Longest image edge used for inference; output is resampled back.")
@click.option("--seed", default=0, show_default=True, help="hash backend seed.")
def main(host, port, backend_kind, mask_model, embed_model, device, max_edge, seed):
    """Serve attention maps and image embeddings over the wire protocol."""
    import uvicorn

    try:
        backend = build_backend(
            backend_kind,
            mask_model=mask_model,
            embed_model=embed_model,
            device=device,
            max_edge=max_edge,
            seed=seed,
        )
    except BackendError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"sidecar ready: backend={backend.name} on http://{host}:{port}")
    uvicorn.run(build_app(backend), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
