#pragma once

#include "hitchin/error.hpp"
#include "hitchin/linalg.hpp"
#include "hitchin/fuchsian.hpp"
#include "hitchin/representations.hpp"
#include "hitchin/positivity.hpp"
#include "hitchin/hilbert.hpp"
#include "hitchin/dynamics.hpp"
#include "hitchin/hausdorff.hpp"
#include "hitchin/io.hpp"
