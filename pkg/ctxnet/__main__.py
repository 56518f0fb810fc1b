from ctxnet.main import run

run()
