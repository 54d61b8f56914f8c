from setuptools import setup

setup(
    name='ntraub',
    packages=['ntraub', 'ntraub.testing'],
    version='0.1',
    description='Convergence radii, error bounds and experiments for the three-step Newton-Traub iteration under '
                'average Lipschitz conditions',
    license="MIT",
    keywords=['newton', 'traub', 'nonlinear systems', 'local convergence', 'lipschitz', 'kantorovich'],
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
    ],
    install_requires=["numpy", "scipy", "pandas", "numba", "dask", "tqdm"],
    extras_require={'tests': ["pytest", "hypothesis"]},
    entry_points={'console_scripts': ['ntraub = ntraub.cli:main']},
    python_requires='>=3.8',
)
