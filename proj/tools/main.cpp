// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/cli.hpp"

int main(int argc, char** argv) { return seqdesc::cli::run(argc, argv); }
