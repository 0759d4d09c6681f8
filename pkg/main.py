#!/usr/bin/env python3
"""
hullscan - Détection de l'enveloppe d'un objet en tomographie proton
"""
import asyncio
import sys

from src.cli import HullScanCli


async def main() -> int:
    """Point d'entrée de l'application"""
    app = HullScanCli()
    return await app.run()

if __name__ == "__main__":
    if sys.platform == 'win32':
        asyncio.set_event_loop_policy(asyncio.WindowsSelectorEventLoopPolicy())
    sys.exit(asyncio.run(main()))
