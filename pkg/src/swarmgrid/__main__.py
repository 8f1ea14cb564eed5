from swarmgrid.harness.cli import main

raise SystemExit(main())
