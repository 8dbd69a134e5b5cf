"""frontlab command-line entry point"""
