from cdscan.cli import main

main()
