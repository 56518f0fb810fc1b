from ctxnet.main import run

if __name__ == "__main__":
    run()
