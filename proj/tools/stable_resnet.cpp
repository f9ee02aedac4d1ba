#include <stable_resnet/cli.hpp>

int main(int argc, char** argv)
{
    return sresnet::cli::dispatch(argc, argv);
}
