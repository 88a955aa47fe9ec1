from app.main import cli_main

raise SystemExit(cli_main())
