"""Main entry point for EmbodySim."""

from EmbodySim.app import main

if __name__ == "__main__":
    main()
