#include <bubblab/cli.hpp>

int main(int argc, char** argv) {
    return bubblab::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
