#pragma once

namespace introspect::cli {
int run(int argc, char ** argv);
}
