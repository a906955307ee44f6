// SPDX-License-Identifier: Apache-2.0

#include "ccub/cli.hpp"

int main(int argc, char** argv) { return ccub::cli::dispatch(argc, argv); }
