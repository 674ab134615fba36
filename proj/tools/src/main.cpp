// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow_cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return splatflow::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
