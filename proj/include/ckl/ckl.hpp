#pragma once

#include "ckl/catalog.hpp"
#include "ckl/coeffs.hpp"
#include "ckl/error.hpp"
#include "ckl/fields.hpp"
#include "ckl/fit.hpp"
#include "ckl/hypersurface.hpp"
#include "ckl/io.hpp"
#include "ckl/jet.hpp"
#include "ckl/linalg.hpp"
#include "ckl/manifold.hpp"
#include "ckl/moments.hpp"
#include "ckl/operator.hpp"
#include "ckl/parallel.hpp"
