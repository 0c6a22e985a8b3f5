from setuptools import setup, find_packages


setup(
    name='ragrec',
    version='0.1.0',

    install_requires=[
        'arrow>=1.2',
        'backoff>=2.2',
        'click>=8.0',
        'h5py>=3.7',
        'httpx>=0.24',
        'Jinja2>=3.1',
        'numpy>=1.24',
        'PyYAML>=6.0',
        'scipy>=1.10',
    ],
    extras_require={
        'test': ['pytest>=7.0'],
    },
    packages=find_packages(where='src'),
    package_dir={'': 'src'},
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'ragrec = ragrec.runner.cli:main',
        ],
    },
)
