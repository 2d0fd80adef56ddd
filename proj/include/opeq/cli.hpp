#pragma once

namespace opeq {

int cli_main(int argc, char **argv);

} // namespace opeq
