import os
import sys


def main():
    # Add the project root to Python path
    project_root = os.path.abspath(os.path.dirname(__file__))
    sys.path.insert(0, project_root)

    if len(sys.argv) > 1 and sys.argv[1] == "serve":
        import uvicorn

        uvicorn.run(
            "app.main:app",
            host="127.0.0.1",
            port=int(os.getenv("PORT", 8001)),
            reload=False
        )
        return 0

    from app.cli import main as cli_main
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
