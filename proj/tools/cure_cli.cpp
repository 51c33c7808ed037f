// SPDX-License-Identifier: Apache-2.0
#include "cure/cli/app.hpp"

int main(int argc, char** argv) { return cure::cli::run_app(argc, argv); }
