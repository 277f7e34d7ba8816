from pyscaling.cli import main

main()
