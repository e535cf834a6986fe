from platelab.app import cli

cli(prog_name='platelab')
