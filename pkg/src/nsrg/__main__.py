import sys
sys.exit(__import__("nsrg.cli", fromlist=["main"]).main())
